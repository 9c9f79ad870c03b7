#pragma once

#include "m3d/geometry.hpp"

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <random>
#include <vector>

namespace m3d {

inline constexpr double kFramePeriod = 0.1;  // 10 Hz

struct GtObject {
  Box7 box;
  double vx = 0.0, vy = 0.0;  // m/s, expressed in the frame's ego axes
  std::uint32_t track_id = 0;

  double speed() const;
};

using Point3f = std::array<float, 3>;

struct FrameRecord {
  double timestamp = 0.0;
  Pose ego_pose;  // world <- ego
  std::vector<Point3f> points;  // ego frame
  std::vector<GtObject> gt;
};

using Sequence = std::vector<FrameRecord>;

/// Speed classes shared by generation and evaluation: stationary < 0.2, slow [0.2, 1),
/// medium [1, 5), fast >= 5 m/s by default.
struct VelocityBuckets {
  double slow_min = 0.2;
  double medium_min = 1.0;
  double fast_min = 5.0;

  enum Bucket : int { kStationary = 0, kSlow = 1, kMedium = 2, kFast = 3 };
  Bucket classify(double speed) const;
  static const char* name(int bucket);
};

/// Explicit object: box at frame 0 in world coordinates plus a constant world velocity.
struct ObjectSpec {
  Box7 box;
  double vx = 0.0, vy = 0.0;
};

struct SceneConfig {
  int num_objects = 4;
  int num_frames = 10;
  // Probability of each velocity bucket and the speed range sampled inside it.
  std::array<double, 4> bucket_mix = {0.25, 0.25, 0.25, 0.25};
  std::array<std::array<double, 2>, 4> bucket_speed = {{{0.0, 0.2}, {0.2, 1.0}, {1.0, 5.0}, {5.0, 10.0}}};
  std::array<double, 2> length_range = {3.8, 5.6};
  std::array<double, 2> width_range = {1.8, 2.3};
  std::array<double, 2> height_range = {1.4, 2.0};
  Eigen::Vector3d sensor = {0.0, 0.0, 1.8};  // ego frame; the ground is z = 0
  double spawn_half_extent = 9.0;  // objects are placed in [-e, e]^2 of the final frame
  double min_sensor_clearance = 1.0;  // meters between the sensor and any box face
  double points_density = 2000.0;  // expected points per object at 1 m range
  double top_face_weight = 0.25;
  double noise_sigma = 0.02;
  bool vehicle_silhouette = true;  // lowered hood over the front quarter
  int num_clutter = 3;  // small unlabeled static obstacles
  double ego_speed = 0.0;  // constant ego velocity along world +x
  std::uint64_t seed = 0;
  std::vector<ObjectSpec> objects;  // overrides random placement when non-empty
};

struct RenderedPoints {
  std::vector<Eigen::Vector3d> points;  // with noise
  std::vector<Eigen::Vector3d> clean;   // before noise
  std::vector<int> source;              // index of the source box
  int skipped_inside = 0;               // boxes skipped because they contain the sensor
};

/// Samples points on the BEV faces whose outward normals face the sensor plus the top face.
/// The expected count per box is points_density / (BEV distance to the sensor).
RenderedPoints render_frame_points(const std::vector<Box7>& boxes, const Eigen::Vector3d& sensor,
                                   const SceneConfig& cfg, std::mt19937_64& rng);

/// Deterministic in cfg (including seed). Throws std::invalid_argument on invalid config.
Sequence generate_sequence(const SceneConfig& cfg);

/// Rounds a box to values that survive a float32 round trip unchanged.
Box7 float_exact(const Box7& b);

}  // namespace m3d
