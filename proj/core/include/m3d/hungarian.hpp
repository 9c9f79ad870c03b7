#pragma once

#include <Eigen/Core>

#include <vector>

namespace m3d {

/// One-to-one matching between ground truths (rows) and predictions (columns).
struct MatchResult {
  std::vector<int> gt_to_pred;  // -1 when the ground truth landed on a dummy column
  std::vector<int> pred_to_gt;  // -1 when the prediction is unmatched
  double total_utility = 0.0;   // summed over ground truths in row order
};

/// Maximum-total-utility assignment of a G x N utility matrix (entries in [0, 1]).
///
/// The problem is squared with dummy rows/columns of utility 0 and solved exactly with
/// the O(max(G,N)^3) shortest-augmenting-path Hungarian method. Columns are scanned in
/// ascending order with strict improvement, so among equal-utility options the lower
/// (gt, pred) indices win. Throws std::invalid_argument on non-finite entries.
MatchResult hungarian_match(const Eigen::MatrixXd& utility);

}  // namespace m3d
