#pragma once

#include <Eigen/Core>

#include <array>
#include <span>
#include <vector>

namespace m3d {

inline constexpr double kPi = 3.14159265358979323846;

/// Wraps an angle into [-pi, pi). Throws std::invalid_argument on non-finite input.
double wrap_angle(double theta);

/// Oriented 3D box: center, size (length along heading, width, height), heading
/// counter-clockwise about +z with 0 along +x.
struct Box7 {
  double cx = 0, cy = 0, cz = 0;
  double length = 1, width = 1, height = 1;
  double heading = 0;

  Box7() = default;
  /// Validates sizes and wraps the heading.
  Box7(double cx, double cy, double cz, double l, double w, double h, double heading);

  bool valid() const { return length > 0 && width > 0 && height > 0; }
  double volume() const { return length * width * height; }
  double bev_area() const { return length * width; }
  double bev_diagonal() const;
  double zmin() const { return cz - 0.5 * height; }
  double zmax() const { return cz + 0.5 * height; }

  /// BEV rectangle, counter-clockwise starting at (+l/2, +w/2) in the box frame.
  std::array<Eigen::Vector2d, 4> bev_corners() const;

  /// Maps a world point into the box frame (x along heading).
  Eigen::Vector3d to_local(const Eigen::Vector3d& p) const;
  Eigen::Vector3d to_world(const Eigen::Vector3d& local) const;
  bool contains(const Eigen::Vector3d& p, double tol = 0.0) const;

  std::array<double, 7> as_array() const { return {cx, cy, cz, length, width, height, heading}; }
  static Box7 from_array(const std::array<double, 7>& a);

  friend bool operator==(const Box7&, const Box7&) = default;
};

/// Rigid transform world <- ego stored as a row-major 4x4 homogeneous matrix.
class Pose {
 public:
  Pose() : m_(Eigen::Matrix4d::Identity()) {}
  /// Throws std::invalid_argument unless the rotation block is orthonormal within
  /// 1e-9 and the last row is (0,0,0,1).
  explicit Pose(const Eigen::Matrix4d& m);
  static Pose from_xyz_yaw(double x, double y, double z, double yaw);
  static Pose from_row_major(std::span<const double, 16> values);

  const Eigen::Matrix4d& matrix() const { return m_; }
  std::array<double, 16> row_major() const;
  Pose inverse() const;
  Pose operator*(const Pose& other) const;
  Eigen::Vector3d apply(const Eigen::Vector3d& p) const;
  /// Yaw of the rotation's x-axis image.
  double yaw() const;

  friend bool operator==(const Pose& a, const Pose& b) { return a.m_ == b.m_; }

 private:
  Eigen::Matrix4d m_;
};

/// Normalized residual between a box and a reference box.
struct ResidualVec {
  double dx = 0, dy = 0, dz = 0;
  double dl = 0, dw = 0, dh = 0;
  double dtheta = 0;

  std::array<double, 7> as_array() const { return {dx, dy, dz, dl, dw, dh, dtheta}; }
  static ResidualVec from_array(std::span<const double> a);
};

/// Centers by the reference BEV diagonal (z by reference height), sizes as log ratios,
/// heading as a wrapped difference.
ResidualVec encode_residuals(const Box7& gt, const Box7& ref);
Box7 decode_residuals(const ResidualVec& res, const Box7& ref);

double bev_intersection_area(const Box7& a, const Box7& b);
double iou_bev(const Box7& a, const Box7& b);
double iou_3d(const Box7& a, const Box7& b);

enum class IouKind { kBev, kVolume };
double iou(const Box7& a, const Box7& b, IouKind kind);

/// Re-expresses boxes given in the `src` ego frame into the `dst` ego frame.
std::vector<Box7> transform_boxes(std::span<const Box7> boxes, const Pose& src, const Pose& dst);
Box7 transform_box(const Box7& box, const Eigen::Matrix4d& dst_from_src);

}  // namespace m3d
