#pragma once

#include "m3d/geometry.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace m3d {

/// Selected locations on a (rows x cols) score map, best first.
struct PeakSet {
  std::vector<int> index;            // flat row-major location, -1 for a sentinel slot
  std::vector<double> score;         // -inf for sentinel slots
  std::vector<std::uint8_t> is_peak; // 0 for best-non-peak fill entries and sentinels

  std::size_t size() const { return index.size(); }
  bool valid(std::size_t i) const { return index[i] >= 0; }
};

/// Local-peak selection with a (kernel x kernel) window, stride 1.
///
/// A location is a peak iff its score is >= every score in its (border-clipped) window and
/// strictly greater than every earlier-index score in that window. The top `num_out` peaks by
/// score are returned; remaining slots are filled with the best non-peak locations (flagged),
/// then with sentinels. Non-finite scores are never selected.
/// Throws std::invalid_argument for an even kernel, a kernel larger than the map, or NaN scores.
PeakSet maxpool_nms(std::span<const double> scores, int rows, int cols, int kernel, int num_out);

/// Boolean peak mask only (same rule as maxpool_nms).
std::vector<std::uint8_t> local_peak_mask(std::span<const double> scores, int rows, int cols,
                                          int kernel);

/// Classic sequential NMS on BEV IoU: repeatedly keep the best remaining box and drop every box
/// overlapping it above `iou_threshold`, stopping after `max_out` survivors. Returns indices.
std::vector<int> sequential_nms(std::span<const Box7> boxes, std::span<const double> scores,
                                double iou_threshold, int max_out);

}  // namespace m3d
