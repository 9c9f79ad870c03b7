#pragma once

#include "m3d/fsd.hpp"

#include <deque>

namespace m3d {

struct BankEntry {
  ProposalSet proposals;  // in this entry's own ego frame
  BevFeatureMap fmap;
  Pose pose;
  int frame_index = 0;
};

/// FIFO of the last `capacity` frames. Pushing at capacity evicts the oldest entry.
class MemoryBank {
 public:
  explicit MemoryBank(int capacity = 4);

  /// Throws std::invalid_argument when the proposal count, feature width or map size differs
  /// from the entries already stored, or when frame indices do not increase.
  void push(ProposalSet proposals, BevFeatureMap fmap, const Pose& pose, int frame_index);

  int capacity() const { return capacity_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const std::deque<BankEntry>& entries() const { return entries_; }
  const BankEntry& operator[](std::size_t i) const { return entries_[i]; }
  void clear() { entries_.clear(); }
  std::vector<int> frame_indices() const;

 private:
  int capacity_;
  std::deque<BankEntry> entries_;
};

/// Keys for one view: boxes in that view's ego frame plus a validity mask.
struct KeyBoxes {
  std::vector<Box7> boxes;
  std::vector<std::uint8_t> valid;
};

/// Union of the target proposals and every stored proposal set, re-expressed in the ego frame
/// of each stored entry. Result[s] has (bank.size() + 1) * N boxes: target first, then the
/// stored sets in bank order.
std::vector<KeyBoxes> union_proposals(const MemoryBank& bank, const ProposalSet& target, const Pose& target_pose);

/// Same union expressed in an arbitrary frame `dst`.
KeyBoxes union_in_frame(const MemoryBank& bank, const ProposalSet& target, const Pose& target_pose, const Pose& dst);

/// Bilinear sample of an (H*W) x C map at continuous cell coordinates (u along rows, v along
/// columns, cell centers at integers). Taps outside the map contribute zero.
Eigen::RowVectorXd bilinear_sample(const ag::Mat& map, int height, int width, double u, double v);

/// Sparse operator S with S * features = per-box mean of K x K bilinear samples. Boxes whose
/// mask entry is 0 get an empty row.
ag::SparseMat roi_operator(const BevFeatureMap& fmap, std::span<const Box7> boxes, int k,
                           std::span<const std::uint8_t> mask = {});

/// Rotated ROI features: K x K key points at the centers of an equal partition of each box's
/// footprint, bilinearly sampled and averaged. Returns boxes.size() x C.
ag::Var extract_roi_features(const BevFeatureMap& fmap, std::span<const Box7> boxes, int k,
                             std::span<const std::uint8_t> mask = {});

}  // namespace m3d
