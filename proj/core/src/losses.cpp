#include "m3d/losses.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace m3d {

namespace {

ag::Var zero() { return ag::Var::constant(ag::Mat::Zero(1, 1)); }

ag::Mat column(std::span<const double> v) {
  ag::Mat m(static_cast<Eigen::Index>(v.size()), 1);
  for (std::size_t i = 0; i < v.size(); ++i) m(static_cast<Eigen::Index>(i), 0) = v[i];
  return m;
}

}  // namespace

ag::Var objectness_loss_binary(const ag::Var& logits, std::span<const std::uint8_t> positive) {
  if (logits.rows() == 0) throw std::invalid_argument("objectness_loss_binary: empty site set");
  if (logits.cols() != 1 || static_cast<std::size_t>(logits.rows()) != positive.size()) {
    throw std::invalid_argument("objectness_loss_binary: expected |C| x 1 logits and |C| labels");
  }
  ag::Mat t(logits.rows(), 1);
  for (std::size_t i = 0; i < positive.size(); ++i) t(static_cast<Eigen::Index>(i), 0) = positive[i] ? 1.0 : 0.0;
  return ag::mean(ag::sigmoid_bce(logits, t));
}

ag::Var objectness_loss_iou_target(const ag::Var& logits, std::span<const double> targets) {
  if (logits.rows() == 0) throw std::invalid_argument("objectness_loss_iou_target: empty set");
  if (logits.cols() != 1 || static_cast<std::size_t>(logits.rows()) != targets.size()) {
    throw std::invalid_argument("objectness_loss_iou_target: expected N x 1 logits and N targets");
  }
  for (double t : targets)
    if (!(t >= 0.0 && t <= 1.0)) throw std::invalid_argument("objectness_loss_iou_target: target outside [0, 1]");
  return ag::mean(ag::sigmoid_bce(logits, column(targets)));
}

LossTerm smooth_l1_loss(const ag::Var& pred, const ag::Mat& target, double beta) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols()) {
    throw std::invalid_argument("smooth_l1_loss: shape mismatch");
  }
  if (pred.rows() == 0) return {zero(), true};
  return {ag::scale(ag::sum(ag::smooth_l1(pred, target, beta)), 1.0 / static_cast<double>(pred.rows())), false};
}

int orientation_bin(double angle, int num_bins) {
  if (num_bins < 1) throw std::invalid_argument("orientation_bin: num_bins must be >= 1");
  const double w = 2.0 * kPi / num_bins;
  return std::clamp(static_cast<int>(std::floor((wrap_angle(angle) + kPi) / w)), 0, num_bins - 1);
}

double orientation_bin_center(int bin, int num_bins) { return -kPi + (bin + 0.5) * 2.0 * kPi / num_bins; }

LossTerm bin_orientation_loss(const ag::Var& bin_logits, const ag::Var& bin_residuals,
                              std::span<const double> target_angles, int num_bins, double beta) {
  if (num_bins < 1) throw std::invalid_argument("bin_orientation_loss: num_bins must be >= 1");
  const Eigen::Index r = static_cast<Eigen::Index>(target_angles.size());
  if (bin_residuals.rows() != r || bin_residuals.cols() != num_bins) {
    throw std::invalid_argument("bin_orientation_loss: residuals must be R x num_bins");
  }
  if (r == 0) return {zero(), true};
  std::vector<int> bins(static_cast<std::size_t>(r));
  ag::Mat onehot = ag::Mat::Zero(r, num_bins);
  ag::Mat res_target(r, 1);
  for (Eigen::Index i = 0; i < r; ++i) {
    bins[i] = orientation_bin(target_angles[i], num_bins);
    onehot(i, bins[i]) = 1.0;
    res_target(i, 0) = wrap_angle(target_angles[i] - orientation_bin_center(bins[i], num_bins));
  }
  const ag::Var picked = ag::row_sum(ag::mul(bin_residuals, ag::Var::constant(std::move(onehot))));
  ag::Var loss = ag::scale(ag::sum(ag::smooth_l1(picked, res_target, beta)), 1.0 / static_cast<double>(r));
  if (num_bins > 1) {
    if (bin_logits.rows() != r || bin_logits.cols() != num_bins) {
      throw std::invalid_argument("bin_orientation_loss: logits must be R x num_bins");
    }
    loss = ag::add(ag::mean(ag::softmax_cross_entropy(bin_logits, bins)), loss);
  }
  return {loss, false};
}

// ---------------------------------------------------------------------------------------------

FsdLoss fsd_loss(const ag::Var& head, const BevFeatureMap& fmap, const FsdBoxCoder& coder,
                 const FsdAssignment& a, std::span<const Box7> gts, const LossOptions& opt) {
  FsdLoss out;
  const int nb = coder.num_bins;
  const ag::Var at_sites = ag::gather_rows(head, a.sites);
  out.num_sites = static_cast<int>(a.sites.size());
  out.objectness = objectness_loss_binary(ag::slice_cols(at_sites, FsdBoxCoder::kObj, 1), a.positive);

  std::vector<int> pos_rows;
  std::vector<double> angles;
  ag::Mat reg_t(a.num_positive(), 6);
  for (std::size_t i = 0; i < a.sites.size(); ++i) {
    if (!a.positive[i]) continue;
    const int cell = a.sites[i];
    const Box7& g = gts[a.site_gt[i]];
    const auto t = coder.encode(g, fmap.cell_center(cell / fmap.width, cell % fmap.width));
    for (int c = 0; c < 6; ++c) reg_t(static_cast<Eigen::Index>(pos_rows.size()), c) = t.reg[c];
    pos_rows.push_back(static_cast<int>(i));
    angles.push_back(g.heading);
  }
  out.num_positive = static_cast<int>(pos_rows.size());
  if (pos_rows.empty()) {
    out.regression = zero();
    out.orientation = zero();
  } else {
    const ag::Var pos = ag::gather_rows(at_sites, pos_rows);
    out.regression = smooth_l1_loss(ag::slice_cols(pos, FsdBoxCoder::kOffset, 6), reg_t, opt.beta).value;
    out.orientation = bin_orientation_loss(ag::slice_cols(pos, FsdBoxCoder::kBins, nb),
                                           ag::slice_cols(pos, FsdBoxCoder::kBins + nb, nb), angles, nb, opt.beta)
                          .value;
  }
  out.total = ag::add(ag::add(out.objectness, out.regression), out.orientation);
  return out;
}

StageTargets stage_targets(const ProposalSet& proposals, std::span<const Box7> gts, const LossOptions& opt) {
  StageTargets t;
  t.iou.assign(proposals.size(), 0.0);
  for (std::size_t p = 0; p < proposals.size(); ++p)
    if (proposals.valid[p]) t.valid_rows.push_back(static_cast<int>(p));
  std::vector<Box7> g(gts.begin(), gts.end());
  const Eigen::MatrixXd ious = iou_matrix(g, proposals, opt.match_iou);
  const MatchResult m = hungarian_match(ious);
  std::vector<std::array<double, 7>> res;
  for (std::size_t p = 0; p < proposals.size(); ++p) {
    const int gi = m.pred_to_gt[p];
    if (gi < 0 || !proposals.valid[p]) continue;
    const double v = ious(gi, static_cast<Eigen::Index>(p));
    if (v < opt.min_iou) continue;
    t.iou[p] = v;
    t.rows.push_back(static_cast<int>(p));
    res.push_back(encode_residuals(g[gi], proposals.boxes[p]).as_array());
  }
  t.residuals.resize(static_cast<Eigen::Index>(res.size()), 7);
  for (std::size_t i = 0; i < res.size(); ++i)
    for (int c = 0; c < 7; ++c) t.residuals(static_cast<Eigen::Index>(i), c) = res[i][c];
  return t;
}

StageLoss stage_loss(std::span<const BoxHead::Output> heads, const StageTargets& t, const LossOptions& opt) {
  StageLoss out;
  if (heads.empty()) throw std::invalid_argument("stage_loss: no prediction sets");
  std::vector<ag::Var> obj, reg;
  std::vector<double> obj_t;
  ag::Mat reg_t(static_cast<Eigen::Index>(t.rows.size() * heads.size()), 6);
  std::vector<double> ang_t;
  Eigen::Index r = 0;
  for (const auto& h : heads) {
    if (!t.valid_rows.empty()) obj.push_back(ag::gather_rows(h.objectness, t.valid_rows));
    for (int p : t.valid_rows) obj_t.push_back(t.iou[p]);
    if (!t.rows.empty()) reg.push_back(ag::gather_rows(h.residuals, t.rows));
    for (std::size_t i = 0; i < t.rows.size(); ++i, ++r) {
      reg_t.row(r) = t.residuals.row(static_cast<Eigen::Index>(i)).head(6);
      ang_t.push_back(t.residuals(static_cast<Eigen::Index>(i), 6));
    }
  }
  out.num_scored = static_cast<int>(obj_t.size());
  out.num_regressed = static_cast<int>(ang_t.size());
  out.objectness = obj.empty() ? zero() : objectness_loss_iou_target(obj.size() == 1 ? obj[0] : ag::concat_rows(obj), obj_t);
  if (reg.empty()) {
    out.regression = zero();
    out.orientation = zero();
  } else {
    const ag::Var pred = reg.size() == 1 ? reg[0] : ag::concat_rows(reg);
    out.regression = smooth_l1_loss(ag::slice_cols(pred, 0, 6), reg_t, opt.beta).value;
    out.orientation = bin_orientation_loss(ag::Var(), ag::slice_cols(pred, 6, 1), ang_t, 1, opt.beta).value;
  }
  out.total = ag::add(ag::add(out.objectness, out.regression), out.orientation);
  return out;
}

bool LossBundle::finite() const {
  return std::isfinite(l_fsd()) && std::isfinite(l_mvaa()) && std::isfinite(l_cv()) && std::isfinite(l_total());
}

std::string LossBundle::describe() const {
  std::ostringstream os;
  os.precision(9);
  os << "L_fsd=" << l_fsd() << " (obj " << fsd_obj << ", reg " << fsd_reg << ", ori " << fsd_ori << ")"
     << " L_mvaa=" << l_mvaa() << " (obj " << mvaa_obj << ", reg " << mvaa_reg << ", ori " << mvaa_ori << ")"
     << " L_cv=" << l_cv() << " (obj " << cv_obj << ", reg " << cv_reg << ", ori " << cv_ori << ")"
     << " L_total=" << l_total() << " |C|=" << count_c << " |R|=" << count_r;
  return os.str();
}

LossBundle total_loss(const ag::Var& l_fsd, const ag::Var& l_mvaa, const ag::Var& l_cv) {
  LossBundle b;
  b.fsd = l_fsd.defined() ? l_fsd : zero();
  b.has_mvaa = l_mvaa.defined();
  b.has_cv = l_cv.defined();
  b.mvaa = b.has_mvaa ? l_mvaa : zero();
  b.cv = b.has_cv ? l_cv : zero();
  b.total = ag::add(ag::add(b.fsd, b.mvaa), b.cv);
  return b;
}

}  // namespace m3d
