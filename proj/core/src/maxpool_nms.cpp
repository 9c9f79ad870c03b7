#include "m3d/maxpool_nms.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace m3d {

namespace {

void check_args(std::span<const double> scores, int rows, int cols, int kernel) {
  if (rows <= 0 || cols <= 0 || static_cast<std::size_t>(rows) * cols != scores.size()) {
    throw std::invalid_argument("maxpool_nms: score map shape mismatch");
  }
  if (kernel < 1 || kernel % 2 == 0) throw std::invalid_argument("maxpool_nms: kernel must be odd");
  if (kernel > rows || kernel > cols) throw std::invalid_argument("maxpool_nms: kernel larger than map");
  for (double s : scores)
    if (std::isnan(s)) throw std::invalid_argument("maxpool_nms: NaN score");
}

// Separable sliding-window maximum with border clipping.
std::vector<double> window_max(std::span<const double> s, int rows, int cols, int radius) {
  std::vector<double> tmp(s.size()), out(s.size());
  for (int r = 0; r < rows; ++r) {
    const double* row = s.data() + static_cast<std::size_t>(r) * cols;
    double* dst = tmp.data() + static_cast<std::size_t>(r) * cols;
    for (int c = 0; c < cols; ++c) {
      const int lo = std::max(0, c - radius), hi = std::min(cols - 1, c + radius);
      dst[c] = *std::max_element(row + lo, row + hi + 1);
    }
  }
  for (int c = 0; c < cols; ++c) {
    for (int r = 0; r < rows; ++r) {
      const int lo = std::max(0, r - radius), hi = std::min(rows - 1, r + radius);
      double m = -std::numeric_limits<double>::infinity();
      for (int k = lo; k <= hi; ++k) m = std::max(m, tmp[static_cast<std::size_t>(k) * cols + c]);
      out[static_cast<std::size_t>(r) * cols + c] = m;
    }
  }
  return out;
}

}  // namespace

std::vector<std::uint8_t> local_peak_mask(std::span<const double> scores, int rows, int cols,
                                          int kernel) {
  check_args(scores, rows, cols, kernel);
  const int radius = kernel / 2;
  const auto wmax = window_max(scores, rows, cols, radius);
  std::vector<std::uint8_t> mask(scores.size(), 0);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const std::size_t i = static_cast<std::size_t>(r) * cols + c;
      const double v = scores[i];
      if (!std::isfinite(v) || v < wmax[i]) continue;
      // Tie-break: an equal score at an earlier flat index inside the window wins.
      bool tied_earlier = false;
      for (int rr = std::max(0, r - radius); rr <= r && !tied_earlier; ++rr) {
        const int c_hi = rr < r ? std::min(cols - 1, c + radius) : c - 1;
        for (int cc = std::max(0, c - radius); cc <= c_hi; ++cc) {
          if (scores[static_cast<std::size_t>(rr) * cols + cc] == v) {
            tied_earlier = true;
            break;
          }
        }
      }
      if (!tied_earlier) mask[i] = 1;
    }
  }
  return mask;
}

PeakSet maxpool_nms(std::span<const double> scores, int rows, int cols, int kernel, int num_out) {
  const auto mask = local_peak_mask(scores, rows, cols, kernel);
  std::vector<int> peaks, rest;
  for (int i = 0; i < static_cast<int>(scores.size()); ++i) {
    if (mask[i]) {
      peaks.push_back(i);
    } else if (std::isfinite(scores[i])) {
      rest.push_back(i);
    }
  }
  auto by_score = [&](int a, int b) { return scores[a] > scores[b] || (scores[a] == scores[b] && a < b); };
  const auto take = static_cast<std::size_t>(std::max(0, num_out));

  PeakSet out;
  out.index.reserve(take);
  const std::size_t np = std::min(take, peaks.size());
  std::partial_sort(peaks.begin(), peaks.begin() + np, peaks.end(), by_score);
  for (std::size_t i = 0; i < np; ++i) {
    out.index.push_back(peaks[i]);
    out.score.push_back(scores[peaks[i]]);
    out.is_peak.push_back(1);
  }
  const std::size_t nf = std::min(take - np, rest.size());
  std::partial_sort(rest.begin(), rest.begin() + nf, rest.end(), by_score);
  for (std::size_t i = 0; i < nf; ++i) {
    out.index.push_back(rest[i]);
    out.score.push_back(scores[rest[i]]);
    out.is_peak.push_back(0);
  }
  while (out.index.size() < take) {
    out.index.push_back(-1);
    out.score.push_back(-std::numeric_limits<double>::infinity());
    out.is_peak.push_back(0);
  }
  return out;
}

std::vector<int> sequential_nms(std::span<const Box7> boxes, std::span<const double> scores,
                                double iou_threshold, int max_out) {
  if (boxes.size() != scores.size()) throw std::invalid_argument("sequential_nms: size mismatch");
  std::vector<int> order(boxes.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return scores[a] > scores[b]; });
  std::vector<double> radius(boxes.size());
  for (std::size_t i = 0; i < boxes.size(); ++i) radius[i] = 0.5 * boxes[i].bev_diagonal();
  std::vector<std::uint8_t> suppressed(boxes.size(), 0);
  std::vector<int> keep;
  for (std::size_t oi = 0; oi < order.size() && static_cast<int>(keep.size()) < max_out; ++oi) {
    const int i = order[oi];
    if (suppressed[i]) continue;
    keep.push_back(i);
    for (std::size_t oj = oi + 1; oj < order.size(); ++oj) {
      const int j = order[oj];
      if (suppressed[j]) continue;
      const double dx = boxes[i].cx - boxes[j].cx, dy = boxes[i].cy - boxes[j].cy;
      const double rr = radius[i] + radius[j];
      if (dx * dx + dy * dy >= rr * rr) continue;
      if (iou_bev(boxes[i], boxes[j]) > iou_threshold) suppressed[j] = 1;
    }
  }
  return keep;
}

}  // namespace m3d
