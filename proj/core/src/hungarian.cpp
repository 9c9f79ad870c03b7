#include "m3d/hungarian.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace m3d {

namespace {

// Minimum-cost perfect matching on a square cost matrix; returns row -> column.
std::vector<int> solve_min_cost(const Eigen::MatrixXd& cost) {
  const int n = static_cast<int>(cost.rows());
  constexpr double kInf = std::numeric_limits<double>::infinity();
  // 1-based potentials; p[j] is the row matched to column j.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, kInf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = kInf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> row_to_col(n, -1);
  for (int j = 1; j <= n; ++j)
    if (p[j] > 0) row_to_col[p[j] - 1] = j - 1;
  return row_to_col;
}

}  // namespace

MatchResult hungarian_match(const Eigen::MatrixXd& utility) {
  if (!utility.allFinite()) throw std::invalid_argument("hungarian_match: non-finite utility");
  const int g = static_cast<int>(utility.rows());
  const int n = static_cast<int>(utility.cols());
  MatchResult out;
  out.gt_to_pred.assign(g, -1);
  out.pred_to_gt.assign(n, -1);
  if (g == 0 || n == 0) return out;

  const int s = std::max(g, n);
  Eigen::MatrixXd cost = Eigen::MatrixXd::Zero(s, s);
  cost.topLeftCorner(g, n) = -utility;
  const auto row_to_col = solve_min_cost(cost);
  for (int r = 0; r < g; ++r) {
    const int c = row_to_col[r];
    if (c >= 0 && c < n) {
      out.gt_to_pred[r] = c;
      out.pred_to_gt[c] = r;
      out.total_utility += utility(r, c);
    }
  }
  return out;
}

}  // namespace m3d
