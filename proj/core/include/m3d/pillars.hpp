#pragma once

#include "m3d/autograd.hpp"
#include "m3d/nn.hpp"

#include <Eigen/Core>

#include <span>
#include <vector>

namespace m3d {

/// Regular BEV grid of infinite-height pillars. Cell (ix, iy) has flat index ix * ny + iy,
/// i.e. dense maps are (nx * ny) x C with x as the row axis.
struct PillarGrid {
  double x_min = -19.2, x_max = 19.2;
  double y_min = -19.2, y_max = 19.2;
  double z_min = -2.0, z_max = 4.0;
  int nx = 128, ny = 128;

  double pillar_dx() const { return (x_max - x_min) / nx; }
  double pillar_dy() const { return (y_max - y_min) / ny; }
  int cells() const { return nx * ny; }
  bool in_range(const Eigen::Vector3d& p) const;
  /// Center of a cell of a map downsampled by `stride`.
  Eigen::Vector2d cell_center(int ix, int iy, int stride = 1) const;
  /// Throws std::invalid_argument for empty ranges or non-positive counts.
  void validate() const;
};

/// Dynamic voxelization result: every kept point belongs to exactly one pillar, no cap.
struct PillarAssignment {
  std::vector<int> point_index;   // original index of each kept point
  std::vector<int> point_pillar;  // compact pillar id of each kept point
  std::vector<int> pillar_cell;   // flat grid cell of each compact pillar
  int discarded = 0;              // points outside the grid range

  int num_pillars() const { return static_cast<int>(pillar_cell.size()); }
};

PillarAssignment pillarize(std::span<const Eigen::Vector3d> points, const PillarGrid& grid);

/// Shared per-point MLP followed by a per-pillar max-pool.
///
/// Per-point input: (z, offsets to the pillar center in pillar units, offsets to the pillar's
/// point mean). Absolute x/y are left out so the encoder is translation covariant.
class PillarEncoder {
 public:
  static constexpr int kInputFeatures = 6;

  PillarEncoder() = default;
  PillarEncoder(nn::ParameterStore& ps, const PillarGrid& grid, const std::vector<int>& widths);

  /// `points` is a (num points) x 3 Var in the same order as the pillarize input.
  ag::Var pillar_features(const PillarAssignment& assignment, const ag::Var& points) const;
  int out_channels() const { return out_channels_; }

 private:
  PillarGrid grid_;
  nn::Mlp mlp_;
  int out_channels_ = 0;
};

/// Dense (nx * ny) x C map with pillar features at occupied cells and zeros elsewhere.
ag::Var scatter_to_grid(const ag::Var& pillar_features, const PillarAssignment& assignment,
                        const PillarGrid& grid);
/// Inverse of scatter_to_grid on occupied cells.
ag::Var gather_from_grid(const ag::Var& dense, const PillarAssignment& assignment);

ag::Var points_to_var(std::span<const Eigen::Vector3d> points);

}  // namespace m3d
