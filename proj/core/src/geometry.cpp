#include "m3d/geometry.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

namespace m3d {

double wrap_angle(double theta) {
  if (!std::isfinite(theta)) throw std::invalid_argument("wrap_angle: non-finite angle");
  constexpr double kTwoPi = 2.0 * kPi;
  double r = std::fmod(theta + kPi, kTwoPi);
  if (r < 0) r += kTwoPi;
  if (r >= kTwoPi) r = 0.0;
  double out = r - kPi;
  if (out >= kPi) out = -kPi;
  return out;
}

Box7::Box7(double cx_, double cy_, double cz_, double l, double w, double h, double th)
    : cx(cx_), cy(cy_), cz(cz_), length(l), width(w), height(h), heading(wrap_angle(th)) {
  if (!(l > 0 && w > 0 && h > 0) || !std::isfinite(l) || !std::isfinite(w) || !std::isfinite(h)) {
    throw std::invalid_argument("Box7: sizes must be positive and finite");
  }
  if (!std::isfinite(cx) || !std::isfinite(cy) || !std::isfinite(cz)) {
    throw std::invalid_argument("Box7: non-finite center");
  }
}

Box7 Box7::from_array(const std::array<double, 7>& a) {
  return Box7(a[0], a[1], a[2], a[3], a[4], a[5], a[6]);
}

double Box7::bev_diagonal() const { return std::sqrt(length * length + width * width); }

std::array<Eigen::Vector2d, 4> Box7::bev_corners() const {
  const double c = std::cos(heading), s = std::sin(heading);
  const double hl = 0.5 * length, hw = 0.5 * width;
  const std::array<Eigen::Vector2d, 4> local = {
      Eigen::Vector2d(hl, hw), Eigen::Vector2d(-hl, hw), Eigen::Vector2d(-hl, -hw),
      Eigen::Vector2d(hl, -hw)};
  std::array<Eigen::Vector2d, 4> out;
  for (int i = 0; i < 4; ++i) {
    out[i] = Eigen::Vector2d(cx + c * local[i].x() - s * local[i].y(),
                             cy + s * local[i].x() + c * local[i].y());
  }
  return out;
}

Eigen::Vector3d Box7::to_local(const Eigen::Vector3d& p) const {
  const double c = std::cos(heading), s = std::sin(heading);
  const double dx = p.x() - cx, dy = p.y() - cy;
  return {c * dx + s * dy, -s * dx + c * dy, p.z() - cz};
}

Eigen::Vector3d Box7::to_world(const Eigen::Vector3d& q) const {
  const double c = std::cos(heading), s = std::sin(heading);
  return {cx + c * q.x() - s * q.y(), cy + s * q.x() + c * q.y(), cz + q.z()};
}

bool Box7::contains(const Eigen::Vector3d& p, double tol) const {
  const Eigen::Vector3d q = to_local(p);
  return std::abs(q.x()) <= 0.5 * length + tol && std::abs(q.y()) <= 0.5 * width + tol &&
         std::abs(q.z()) <= 0.5 * height + tol;
}

// ---------------------------------------------------------------------------

Pose::Pose(const Eigen::Matrix4d& m) : m_(m) {
  if (!m.allFinite()) throw std::invalid_argument("Pose: non-finite entries");
  const Eigen::Matrix3d r = m.topLeftCorner<3, 3>();
  const double ortho_err = (r.transpose() * r - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  if (ortho_err > 1e-9) throw std::invalid_argument("Pose: rotation block is not orthonormal");
  if (m(3, 0) != 0.0 || m(3, 1) != 0.0 || m(3, 2) != 0.0 || m(3, 3) != 1.0) {
    throw std::invalid_argument("Pose: last row must be (0,0,0,1)");
  }
}

Pose Pose::from_xyz_yaw(double x, double y, double z, double yaw) {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  const double c = std::cos(yaw), s = std::sin(yaw);
  m(0, 0) = c;
  m(0, 1) = -s;
  m(1, 0) = s;
  m(1, 1) = c;
  m(0, 3) = x;
  m(1, 3) = y;
  m(2, 3) = z;
  return Pose(m);
}

Pose Pose::from_row_major(std::span<const double, 16> v) {
  Eigen::Matrix4d m;
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) m(r, c) = v[r * 4 + c];
  return Pose(m);
}

std::array<double, 16> Pose::row_major() const {
  std::array<double, 16> out{};
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) out[r * 4 + c] = m_(r, c);
  return out;
}

Pose Pose::inverse() const {
  Eigen::Matrix4d inv = Eigen::Matrix4d::Identity();
  const Eigen::Matrix3d rt = m_.topLeftCorner<3, 3>().transpose();
  inv.topLeftCorner<3, 3>() = rt;
  inv.topRightCorner<3, 1>() = -rt * m_.topRightCorner<3, 1>();
  Pose p;
  p.m_ = inv;
  return p;
}

Pose Pose::operator*(const Pose& other) const {
  Pose p;
  p.m_ = m_ * other.m_;
  p.m_.row(3) << 0, 0, 0, 1;
  return p;
}

Eigen::Vector3d Pose::apply(const Eigen::Vector3d& p) const {
  return m_.topLeftCorner<3, 3>() * p + m_.topRightCorner<3, 1>();
}

double Pose::yaw() const { return std::atan2(m_(1, 0), m_(0, 0)); }

// ---------------------------------------------------------------------------

ResidualVec ResidualVec::from_array(std::span<const double> a) {
  if (a.size() != 7) throw std::invalid_argument("ResidualVec: expected 7 components");
  return ResidualVec{a[0], a[1], a[2], a[3], a[4], a[5], a[6]};
}

ResidualVec encode_residuals(const Box7& gt, const Box7& ref) {
  if (!ref.valid() || !gt.valid()) throw std::invalid_argument("encode_residuals: invalid box size");
  const double d = ref.bev_diagonal();
  ResidualVec r;
  r.dx = (gt.cx - ref.cx) / d;
  r.dy = (gt.cy - ref.cy) / d;
  r.dz = (gt.cz - ref.cz) / ref.height;
  r.dl = std::log(gt.length / ref.length);
  r.dw = std::log(gt.width / ref.width);
  r.dh = std::log(gt.height / ref.height);
  r.dtheta = wrap_angle(gt.heading - ref.heading);
  return r;
}

Box7 decode_residuals(const ResidualVec& res, const Box7& ref) {
  if (!ref.valid()) throw std::invalid_argument("decode_residuals: invalid reference box");
  const double d = ref.bev_diagonal();
  return Box7(ref.cx + res.dx * d, ref.cy + res.dy * d, ref.cz + res.dz * ref.height,
              ref.length * std::exp(res.dl), ref.width * std::exp(res.dw),
              ref.height * std::exp(res.dh), ref.heading + res.dtheta);
}

// ---------------------------------------------------------------------------
// Rotated rectangle intersection: express a's corners in b's box frame and clip
// them against the four axis-aligned half-planes of b. Stays stable when edges
// of the two boxes (nearly) coincide.

namespace {

struct Polygon8 {
  std::array<Eigen::Vector2d, 8> v;
  int n = 0;
};

// keeps the part of `in` where s * coord(axis) <= limit; points within `tol` of the
// line count as inside so corners that sit on it after rounding survive
Polygon8 clip_half_plane(const Polygon8& in, int axis, double s, double limit, double tol) {
  Polygon8 out;
  for (int i = 0; i < in.n; ++i) {
    const Eigen::Vector2d& cur = in.v[i];
    const Eigen::Vector2d& prev = in.v[(i + in.n - 1) % in.n];
    double dc = s * cur[axis] - limit, dp = s * prev[axis] - limit;
    if (std::abs(dc) <= tol) dc = 0;
    if (std::abs(dp) <= tol) dp = 0;
    if (dc <= 0) {
      if (dp > 0) out.v[out.n++] = prev + (cur - prev) * (dp / (dp - dc));
      out.v[out.n++] = cur;
    } else if (dp <= 0) {
      out.v[out.n++] = prev + (cur - prev) * (dp / (dp - dc));
    }
  }
  return out;
}

void check_box(const Box7& b, const char* where) {
  if (!(b.length > 0 && b.width > 0 && b.height > 0)) {
    throw std::invalid_argument(std::string(where) + ": degenerate box");
  }
}

}  // namespace

double bev_intersection_area(const Box7& a, const Box7& b) {
  const double c = std::cos(b.heading), s = std::sin(b.heading);
  Polygon8 poly;
  for (const auto& p : a.bev_corners()) {
    const double dx = p.x() - b.cx, dy = p.y() - b.cy;
    poly.v[poly.n++] = Eigen::Vector2d(c * dx + s * dy, -s * dx + c * dy);
  }
  const double hl = 0.5 * b.length, hw = 0.5 * b.width;
  const double tol = 1e-12 * (1.0 + std::abs(a.cx - b.cx) + std::abs(a.cy - b.cy) + a.length + a.width);
  poly = clip_half_plane(poly, 0, 1.0, hl, tol);
  poly = clip_half_plane(poly, 0, -1.0, hl, tol);
  poly = clip_half_plane(poly, 1, 1.0, hw, tol);
  poly = clip_half_plane(poly, 1, -1.0, hw, tol);
  if (poly.n < 3) return 0.0;
  double area2 = 0.0;
  for (int i = 0; i < poly.n; ++i) {
    const auto& p = poly.v[i];
    const auto& q = poly.v[(i + 1) % poly.n];
    area2 += p.x() * q.y() - q.x() * p.y();
  }
  return std::min(std::abs(0.5 * area2), std::min(a.bev_area(), b.bev_area()));
}

namespace {
// Evaluates in a canonical argument order so iou(a,b) == iou(b,a) bit-for-bit.
double ordered_intersection(const Box7& a, const Box7& b) {
  return a.as_array() <= b.as_array() ? bev_intersection_area(a, b) : bev_intersection_area(b, a);
}
}  // namespace

double iou_bev(const Box7& a, const Box7& b) {
  check_box(a, "iou_bev");
  check_box(b, "iou_bev");
  const double inter = ordered_intersection(a, b);
  const double uni = a.bev_area() + b.bev_area() - inter;
  if (uni <= 0.0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

double iou_3d(const Box7& a, const Box7& b) {
  check_box(a, "iou_3d");
  check_box(b, "iou_3d");
  const double zo = std::min(a.zmax(), b.zmax()) - std::max(a.zmin(), b.zmin());
  if (zo <= 0.0) return 0.0;
  const double bev = ordered_intersection(a, b);
  const double inter = bev * zo;
  const double uni = a.volume() + b.volume() - inter;
  if (uni <= 0.0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

double iou(const Box7& a, const Box7& b, IouKind kind) {
  return kind == IouKind::kBev ? iou_bev(a, b) : iou_3d(a, b);
}

Box7 transform_box(const Box7& box, const Eigen::Matrix4d& t) {
  const Eigen::Vector3d c = t.topLeftCorner<3, 3>() * Eigen::Vector3d(box.cx, box.cy, box.cz) +
                            t.topRightCorner<3, 1>();
  const Eigen::Vector3d d =
      t.topLeftCorner<3, 3>() * Eigen::Vector3d(std::cos(box.heading), std::sin(box.heading), 0.0);
  return Box7(c.x(), c.y(), c.z(), box.length, box.width, box.height, std::atan2(d.y(), d.x()));
}

std::vector<Box7> transform_boxes(std::span<const Box7> boxes, const Pose& src, const Pose& dst) {
  const Eigen::Matrix4d t = dst.inverse().matrix() * src.matrix();
  std::vector<Box7> out;
  out.reserve(boxes.size());
  if (src == dst) {
    out.assign(boxes.begin(), boxes.end());
    return out;
  }
  for (const auto& b : boxes) out.push_back(transform_box(b, t));
  return out;
}

}  // namespace m3d
