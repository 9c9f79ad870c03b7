#include "m3d/memory_bank.hpp"

#include <cmath>
#include <stdexcept>

namespace m3d {

MemoryBank::MemoryBank(int capacity) : capacity_(capacity) {
  if (capacity < 0) throw std::invalid_argument("MemoryBank: negative capacity");
}

void MemoryBank::push(ProposalSet proposals, BevFeatureMap fmap, const Pose& pose, int frame_index) {
  if (!entries_.empty()) {
    const BankEntry& ref = entries_.back();
    if (proposals.size() != ref.proposals.size()) throw std::invalid_argument("MemoryBank::push: proposal count mismatch");
    if (fmap.channels() != ref.fmap.channels() || fmap.height != ref.fmap.height || fmap.width != ref.fmap.width) {
      throw std::invalid_argument("MemoryBank::push: feature map shape mismatch");
    }
    if (frame_index <= ref.frame_index) throw std::invalid_argument("MemoryBank::push: frame index must increase");
  }
  if (fmap.features.defined() && fmap.features.rows() != static_cast<Eigen::Index>(fmap.height) * fmap.width) {
    throw std::invalid_argument("MemoryBank::push: feature rows do not match the map size");
  }
  if (capacity_ == 0) return;
  if (static_cast<int>(entries_.size()) == capacity_) entries_.pop_front();
  entries_.push_back({std::move(proposals), std::move(fmap), pose, frame_index});
}

std::vector<int> MemoryBank::frame_indices() const {
  std::vector<int> out;
  for (const auto& e : entries_) out.push_back(e.frame_index);
  return out;
}

KeyBoxes union_in_frame(const MemoryBank& bank, const ProposalSet& target, const Pose& target_pose, const Pose& dst) {
  KeyBoxes k;
  auto append = [&](const ProposalSet& ps, const Pose& src) {
    const auto moved = transform_boxes(ps.boxes, src, dst);
    k.boxes.insert(k.boxes.end(), moved.begin(), moved.end());
    k.valid.insert(k.valid.end(), ps.valid.begin(), ps.valid.end());
  };
  append(target, target_pose);
  for (const auto& e : bank.entries()) append(e.proposals, e.pose);
  return k;
}

std::vector<KeyBoxes> union_proposals(const MemoryBank& bank, const ProposalSet& target, const Pose& target_pose) {
  if (bank.empty()) throw std::invalid_argument("union_proposals: empty bank");
  std::vector<KeyBoxes> out;
  for (const auto& e : bank.entries()) out.push_back(union_in_frame(bank, target, target_pose, e.pose));
  return out;
}

// ---------------------------------------------------------------------------------------------

namespace {

struct Tap {
  int cell;
  double w;
};

// Up to four bilinear taps; out-of-map taps are dropped (zero padding).
int bilinear_taps(int height, int width, double u, double v, Tap* taps) {
  const double fu = std::floor(u), fv = std::floor(v);
  const int r0 = static_cast<int>(fu), c0 = static_cast<int>(fv);
  const double au = u - fu, av = v - fv;
  int n = 0;
  for (int dr = 0; dr < 2; ++dr) {
    const int r = r0 + dr;
    if (r < 0 || r >= height) continue;
    const double wr = dr ? au : 1.0 - au;
    for (int dc = 0; dc < 2; ++dc) {
      const int c = c0 + dc;
      if (c < 0 || c >= width) continue;
      const double w = wr * (dc ? av : 1.0 - av);
      if (w != 0.0) taps[n++] = {r * width + c, w};
    }
  }
  return n;
}

}  // namespace

Eigen::RowVectorXd bilinear_sample(const ag::Mat& map, int height, int width, double u, double v) {
  Eigen::RowVectorXd out = Eigen::RowVectorXd::Zero(map.cols());
  Tap taps[4];
  const int n = bilinear_taps(height, width, u, v, taps);
  for (int i = 0; i < n; ++i) out += taps[i].w * map.row(taps[i].cell);
  return out;
}

ag::SparseMat roi_operator(const BevFeatureMap& fmap, std::span<const Box7> boxes, int k,
                           std::span<const std::uint8_t> mask) {
  if (k < 1) throw std::invalid_argument("roi_operator: K must be >= 1");
  if (!mask.empty() && mask.size() != boxes.size()) throw std::invalid_argument("roi_operator: mask size mismatch");
  const double cw = fmap.grid.pillar_dx() * fmap.stride, ch = fmap.grid.pillar_dy() * fmap.stride;
  const double inv_kk = 1.0 / (static_cast<double>(k) * k);
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(boxes.size() * k * k * 4);
  for (std::size_t b = 0; b < boxes.size(); ++b) {
    if (!mask.empty() && !mask[b]) continue;
    const Box7& box = boxes[b];
    const double c = std::cos(box.heading), s = std::sin(box.heading);
    for (int i = 0; i < k; ++i) {
      const double lx = ((i + 0.5) / k - 0.5) * box.length;
      for (int j = 0; j < k; ++j) {
        const double ly = ((j + 0.5) / k - 0.5) * box.width;
        const double x = box.cx + c * lx - s * ly, y = box.cy + s * lx + c * ly;
        const double u = (x - fmap.grid.x_min) / cw - 0.5, v = (y - fmap.grid.y_min) / ch - 0.5;
        Tap taps[4];
        const int n = bilinear_taps(fmap.height, fmap.width, u, v, taps);
        for (int t = 0; t < n; ++t) trip.emplace_back(static_cast<int>(b), taps[t].cell, taps[t].w * inv_kk);
      }
    }
  }
  ag::SparseMat op(static_cast<Eigen::Index>(boxes.size()), static_cast<Eigen::Index>(fmap.height) * fmap.width);
  op.setFromTriplets(trip.begin(), trip.end());
  return op;
}

ag::Var extract_roi_features(const BevFeatureMap& fmap, std::span<const Box7> boxes, int k,
                             std::span<const std::uint8_t> mask) {
  return ag::sparse_apply(roi_operator(fmap, boxes, k, mask), fmap.features);
}

}  // namespace m3d
