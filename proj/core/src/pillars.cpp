#include "m3d/pillars.hpp"

#include <cmath>
#include <stdexcept>
#include <unordered_map>

namespace m3d {

bool PillarGrid::in_range(const Eigen::Vector3d& p) const {
  return p.x() >= x_min && p.x() < x_max && p.y() >= y_min && p.y() < y_max && p.z() >= z_min &&
         p.z() <= z_max;
}

Eigen::Vector2d PillarGrid::cell_center(int ix, int iy, int stride) const {
  return {x_min + (ix + 0.5) * pillar_dx() * stride, y_min + (iy + 0.5) * pillar_dy() * stride};
}

void PillarGrid::validate() const {
  if (nx <= 0 || ny <= 0) throw std::invalid_argument("PillarGrid: non-positive pillar count");
  if (!(x_max > x_min) || !(y_max > y_min) || !(z_max > z_min)) {
    throw std::invalid_argument("PillarGrid: empty range");
  }
}

PillarAssignment pillarize(std::span<const Eigen::Vector3d> points, const PillarGrid& grid) {
  PillarAssignment out;
  const double dx = grid.pillar_dx(), dy = grid.pillar_dy();
  std::unordered_map<int, int> cell_to_pillar;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& p = points[i];
    if (!p.allFinite() || !grid.in_range(p)) {
      ++out.discarded;
      continue;
    }
    const int ix = std::min(grid.nx - 1, static_cast<int>(std::floor((p.x() - grid.x_min) / dx)));
    const int iy = std::min(grid.ny - 1, static_cast<int>(std::floor((p.y() - grid.y_min) / dy)));
    const int cell = ix * grid.ny + iy;
    auto [it, inserted] = cell_to_pillar.try_emplace(cell, static_cast<int>(out.pillar_cell.size()));
    if (inserted) out.pillar_cell.push_back(cell);
    out.point_index.push_back(static_cast<int>(i));
    out.point_pillar.push_back(it->second);
  }
  return out;
}

PillarEncoder::PillarEncoder(nn::ParameterStore& ps, const PillarGrid& grid, const std::vector<int>& widths)
    : grid_(grid), mlp_(ps, "pillar.mlp", kInputFeatures, widths, /*relu_last=*/true),
      out_channels_(widths.empty() ? kInputFeatures : widths.back()) {
  grid_.validate();
}

ag::Var PillarEncoder::pillar_features(const PillarAssignment& a, const ag::Var& points) const {
  if (points.cols() != 3) throw std::invalid_argument("pillar_features: points must be N x 3");
  const int np = a.num_pillars();
  if (a.point_index.empty()) return ag::Var::constant(ag::Mat::Zero(0, out_channels_));
  const ag::Var kept = ag::gather_rows(points, a.point_index);
  const ag::Var means = ag::segment_mean(kept, a.point_pillar, np);
  const ag::Var to_mean = ag::sub(kept, ag::gather_rows(means, a.point_pillar));

  ag::Mat centers(static_cast<Eigen::Index>(a.point_index.size()), 3);
  const double dx = grid_.pillar_dx(), dy = grid_.pillar_dy();
  for (std::size_t i = 0; i < a.point_index.size(); ++i) {
    const int cell = a.pillar_cell[a.point_pillar[i]];
    const auto c = grid_.cell_center(cell / grid_.ny, cell % grid_.ny);
    centers.row(static_cast<Eigen::Index>(i)) << c.x(), c.y(), 0.0;
  }
  const ag::Var to_center = ag::sub(kept, ag::Var::constant(std::move(centers)));

  // Fixed per-column scalings into pillar units.
  ag::Mat s_center = ag::Mat::Zero(3, 2);
  s_center(0, 0) = 1.0 / dx;
  s_center(1, 1) = 1.0 / dy;
  ag::Mat s_z = ag::Mat::Zero(3, 1);
  s_z(2, 0) = 1.0;
  ag::Mat s_mean = ag::Mat::Zero(3, 3);
  s_mean(0, 0) = 1.0 / dx;
  s_mean(1, 1) = 1.0 / dy;
  s_mean(2, 2) = 1.0;
  const std::vector<ag::Var> parts = {
      ag::matmul(kept, ag::Var::constant(std::move(s_z))),
      ag::matmul(to_center, ag::Var::constant(std::move(s_center))),
      ag::matmul(to_mean, ag::Var::constant(std::move(s_mean))),
  };
  const ag::Var input = ag::concat_cols(parts);
  return ag::segment_max(mlp_(input), a.point_pillar, np);
}

ag::Var scatter_to_grid(const ag::Var& pillar_features, const PillarAssignment& a, const PillarGrid& grid) {
  if (pillar_features.rows() != a.num_pillars()) throw std::invalid_argument("scatter_to_grid: pillar count mismatch");
  return ag::scatter_rows(pillar_features, a.pillar_cell, grid.cells());
}

ag::Var gather_from_grid(const ag::Var& dense, const PillarAssignment& a) {
  return ag::gather_rows(dense, a.pillar_cell);
}

ag::Var points_to_var(std::span<const Eigen::Vector3d> points) {
  ag::Mat m(static_cast<Eigen::Index>(points.size()), 3);
  for (std::size_t i = 0; i < points.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = points[i].transpose();
  return ag::Var::constant(std::move(m));
}

}  // namespace m3d
