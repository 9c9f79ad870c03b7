#include "m3d/fsd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

namespace m3d {

int BackboneConfig::out_channels() const { return std::accumulate(up_channels.begin(), up_channels.end(), 0); }

Backbone::Backbone(nn::ParameterStore& ps, int in_channels, const BackboneConfig& cfg)
    : cfg_(cfg), in_channels_(in_channels) {
  const std::size_t nb = cfg.block_channels.size();
  if (nb == 0 || cfg.block_layers.size() != nb || cfg.block_strides.size() != nb || cfg.up_channels.size() != nb) {
    throw std::invalid_argument("BackboneConfig: per-block lists must have equal non-zero length");
  }
  int prev = in_channels;
  int cum = 1;
  for (std::size_t b = 0; b < nb; ++b) {
    if (cfg.block_layers[b] < 1 || cfg.block_strides[b] < 1) throw std::invalid_argument("BackboneConfig: bad block");
    cum *= cfg.block_strides[b];
    if (cum % cfg.output_stride != 0) {
      throw std::invalid_argument("BackboneConfig: output stride must divide every block stride");
    }
    std::vector<nn::Conv2d> convs;
    for (int l = 0; l < cfg.block_layers[b]; ++l) {
      convs.emplace_back(ps, "backbone.b" + std::to_string(b) + ".c" + std::to_string(l), l == 0 ? prev : cfg.block_channels[b],
                         cfg.block_channels[b], 3, l == 0 ? cfg.block_strides[b] : 1);
    }
    blocks_.push_back(std::move(convs));
    ups_.emplace_back(ps, "backbone.up" + std::to_string(b), cfg.block_channels[b], cfg.up_channels[b],
                      cum / cfg.output_stride);
    prev = cfg.block_channels[b];
  }
}

BevFeatureMap Backbone::forward(const ag::Var& dense, const PillarGrid& grid) const {
  if (dense.rows() != grid.cells() || dense.cols() != in_channels_) {
    throw std::invalid_argument("Backbone: input shape does not match the configured grid/channels");
  }
  int cum = 1;
  for (int s : cfg_.block_strides) cum *= s;
  if (grid.nx % cum != 0 || grid.ny % cum != 0) {
    throw std::invalid_argument("Backbone: grid size must be divisible by the total stride");
  }
  int h = grid.nx, w = grid.ny;
  ag::Var x = dense;
  std::vector<ag::Var> outs;
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    for (const auto& conv : blocks_[b]) x = ag::relu(conv(x, h, w));
    int uh = h, uw = w;
    outs.push_back(ag::relu(ups_[b](x, uh, uw)));
  }
  BevFeatureMap out;
  out.features = outs.size() == 1 ? outs[0] : ag::concat_cols(outs);
  out.stride = cfg_.output_stride;
  out.height = grid.nx / cfg_.output_stride;
  out.width = grid.ny / cfg_.output_stride;
  out.grid = grid;
  return out;
}

// ---------------------------------------------------------------------------------------------

double FsdBoxCoder::prior_diagonal() const { return std::hypot(prior_length, prior_width); }
double FsdBoxCoder::bin_width() const { return 2.0 * kPi / num_bins; }
double FsdBoxCoder::bin_center(int bin) const { return -kPi + (bin + 0.5) * bin_width(); }

int FsdBoxCoder::bin_of(double heading) const {
  const double h = wrap_angle(heading);
  return std::clamp(static_cast<int>(std::floor((h + kPi) / bin_width())), 0, num_bins - 1);
}

FsdBoxCoder::Target FsdBoxCoder::encode(const Box7& gt, const Eigen::Vector2d& c) const {
  const double d = prior_diagonal();
  Target t;
  t.reg = {(gt.cx - c.x()) / d,
           (gt.cy - c.y()) / d,
           (gt.cz - prior_z) / prior_height,
           std::log(gt.length / prior_length),
           std::log(gt.width / prior_width),
           std::log(gt.height / prior_height)};
  t.bin = bin_of(gt.heading);
  t.bin_residual = wrap_angle(gt.heading - bin_center(t.bin));
  return t;
}

Box7 FsdBoxCoder::decode(std::span<const double> row, const Eigen::Vector2d& c) const {
  const double d = prior_diagonal();
  auto clamp_log = [](double v) { return std::clamp(v, -10.0, 10.0); };
  int best = 0;
  for (int b = 1; b < num_bins; ++b)
    if (row[kBins + b] > row[kBins + best]) best = b;
  const double heading = bin_center(best) + row[kBins + num_bins + best];
  return Box7(c.x() + row[kOffset] * d, c.y() + row[kOffset + 1] * d, prior_z + row[kZ] * prior_height,
              prior_length * std::exp(clamp_log(row[kLogSize])), prior_width * std::exp(clamp_log(row[kLogSize + 1])),
              prior_height * std::exp(clamp_log(row[kLogSize + 2])), heading);
}

DenseHead::DenseHead(nn::ParameterStore& ps, int in_channels, const FsdBoxCoder& coder)
    : proj_(ps, "fsd.head", in_channels, coder.channels()) {}

ag::Var DenseHead::forward(const BevFeatureMap& fmap) const { return proj_(fmap.features); }

std::vector<Box7> decode_dense(const ag::Mat& head, const BevFeatureMap& fmap, const FsdBoxCoder& coder) {
  std::vector<Box7> out;
  out.reserve(static_cast<std::size_t>(head.rows()));
  for (int r = 0; r < fmap.height; ++r)
    for (int c = 0; c < fmap.width; ++c) {
      const Eigen::Index i = static_cast<Eigen::Index>(r) * fmap.width + c;
      out.push_back(coder.decode(std::span<const double>(head.row(i).data(), head.cols()), fmap.cell_center(r, c)));
    }
  return out;
}

std::size_t ProposalSet::valid_count() const {
  return static_cast<std::size_t>(std::count(valid.begin(), valid.end(), std::uint8_t{1}));
}

ProposalSet select_proposals(const ag::Mat& head, const BevFeatureMap& fmap, const FsdBoxCoder& coder, int kernel,
                             int num_proposals) {
  std::vector<double> obj(static_cast<std::size_t>(head.rows()));
  for (Eigen::Index i = 0; i < head.rows(); ++i) obj[i] = head(i, FsdBoxCoder::kObj);
  const PeakSet peaks = maxpool_nms(obj, fmap.height, fmap.width, kernel, num_proposals);
  ProposalSet ps;
  for (std::size_t k = 0; k < peaks.size(); ++k) {
    const int loc = peaks.index[k];
    ps.locations.push_back(loc);
    ps.scores.push_back(peaks.score[k]);
    ps.is_peak.push_back(peaks.is_peak[k]);
    if (loc < 0) {
      ps.boxes.emplace_back();
      ps.valid.push_back(0);
      continue;
    }
    const Eigen::Index i = loc;
    ps.boxes.push_back(coder.decode(std::span<const double>(head.row(i).data(), head.cols()),
                                    fmap.cell_center(loc / fmap.width, loc % fmap.width)));
    ps.valid.push_back(1);
  }
  return ps;
}

// ---------------------------------------------------------------------------------------------

int FsdAssignment::num_positive() const {
  return static_cast<int>(std::count(positive.begin(), positive.end(), std::uint8_t{1}));
}

Eigen::MatrixXd iou_matrix(const std::vector<Box7>& gts, const ProposalSet& proposals, IouKind kind) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(gts.size()),
                                            static_cast<Eigen::Index>(proposals.size()));
  for (std::size_t g = 0; g < gts.size(); ++g)
    for (std::size_t p = 0; p < proposals.size(); ++p)
      if (proposals.valid[p]) m(static_cast<Eigen::Index>(g), static_cast<Eigen::Index>(p)) = iou(gts[g], proposals.boxes[p], kind);
  return m;
}

namespace {

// Nearest feature-map cell (by center distance) to `xy` that is not yet taken.
int nearest_free_cell(const Eigen::Vector2d& xy, const BevFeatureMap& fmap, const std::vector<std::uint8_t>& taken) {
  const double cw = fmap.grid.pillar_dx() * fmap.stride, ch = fmap.grid.pillar_dy() * fmap.stride;
  const int r0 = std::clamp(static_cast<int>(std::floor((xy.x() - fmap.grid.x_min) / cw)), 0, fmap.height - 1);
  const int c0 = std::clamp(static_cast<int>(std::floor((xy.y() - fmap.grid.y_min) / ch)), 0, fmap.width - 1);
  const int max_radius = std::max(fmap.height, fmap.width);
  for (int radius = 0; radius <= max_radius; ++radius) {
    int best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    // Any cell in a ring of Chebyshev radius r+1 is at least r cells away, so scanning one ring past
    // the first hit keeps the Euclidean nearest.
    const int scan = radius == 0 ? 0 : radius + 1;
    for (int r = std::max(0, r0 - scan); r <= std::min(fmap.height - 1, r0 + scan); ++r)
      for (int c = std::max(0, c0 - scan); c <= std::min(fmap.width - 1, c0 + scan); ++c) {
        const int cell = r * fmap.width + c;
        if (taken[cell]) continue;
        const double d = (fmap.cell_center(r, c) - xy).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = cell;
        }
      }
    if (best >= 0) return best;
  }
  return -1;
}

}  // namespace

FsdAssignment fsd_assign(const ProposalSet& proposals, const std::vector<Box7>& gts, const BevFeatureMap& fmap,
                         IouKind iou_kind, AssignStrategy strategy) {
  FsdAssignment a;
  const int cells = fmap.height * fmap.width;
  std::vector<std::uint8_t> taken(static_cast<std::size_t>(cells), 0);
  a.gt_site.assign(gts.size(), -1);
  a.gt_reassigned.assign(gts.size(), 0);

  const Eigen::MatrixXd ious = iou_matrix(gts, proposals, iou_kind);
  a.match = hungarian_match(ious);
  if (strategy == AssignStrategy::kHungarian) {
    for (std::size_t g = 0; g < gts.size(); ++g) {
      const int p = a.match.gt_to_pred[g];
      if (p >= 0 && ious(static_cast<Eigen::Index>(g), p) > 0.0) {
        a.gt_site[g] = proposals.locations[p];
        taken[a.gt_site[g]] = 1;
      }
    }
  }
  for (std::size_t g = 0; g < gts.size(); ++g) {
    if (a.gt_site[g] >= 0) continue;
    const int cell = nearest_free_cell({gts[g].cx, gts[g].cy}, fmap, taken);
    if (cell < 0) throw std::logic_error("fsd_assign: more ground truths than feature-map cells");
    a.gt_site[g] = cell;
    a.gt_reassigned[g] = 1;
    taken[cell] = 1;
  }

  std::unordered_map<int, int> cell_gt;
  for (std::size_t g = 0; g < gts.size(); ++g) cell_gt[a.gt_site[g]] = static_cast<int>(g);
  std::vector<std::uint8_t> in_c(static_cast<std::size_t>(cells), 0);
  auto add_site = [&](int cell) {
    if (in_c[cell]) return;
    in_c[cell] = 1;
    a.sites.push_back(cell);
    const auto it = cell_gt.find(cell);
    a.positive.push_back(it != cell_gt.end() ? 1 : 0);
    a.site_gt.push_back(it != cell_gt.end() ? it->second : -1);
  };
  for (std::size_t p = 0; p < proposals.size(); ++p)
    if (proposals.valid[p]) add_site(proposals.locations[p]);
  for (std::size_t g = 0; g < gts.size(); ++g) add_site(a.gt_site[g]);
  return a;
}

}  // namespace m3d
