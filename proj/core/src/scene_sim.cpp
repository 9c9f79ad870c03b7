#include "m3d/scene_sim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace m3d {

double GtObject::speed() const { return std::hypot(vx, vy); }

VelocityBuckets::Bucket VelocityBuckets::classify(double speed) const {
  if (speed < slow_min) return kStationary;
  if (speed < medium_min) return kSlow;
  if (speed < fast_min) return kMedium;
  return kFast;
}

const char* VelocityBuckets::name(int bucket) {
  static const char* kNames[] = {"stationary", "slow", "medium", "fast"};
  return bucket >= 0 && bucket < 4 ? kNames[bucket] : "unknown";
}

Box7 float_exact(const Box7& b) {
  auto f = [](double v) { return static_cast<double>(static_cast<float>(v)); };
  float h = static_cast<float>(b.heading);
  while (static_cast<double>(h) < -kPi) h = std::nextafter(h, 0.0f);
  while (static_cast<double>(h) >= kPi) h = std::nextafter(h, 0.0f);
  Box7 out;
  out.cx = f(b.cx);
  out.cy = f(b.cy);
  out.cz = f(b.cz);
  out.length = f(b.length);
  out.width = f(b.width);
  out.height = f(b.height);
  out.heading = static_cast<double>(h);
  return out;
}

namespace {

struct Face {
  Eigen::Vector2d normal;  // local BEV outward normal
  double offset;           // distance of the face plane from the center along the normal
  double extent;           // half extent along the face
  bool along_length;       // true for left/right faces (they span the length)
};

void validate(const SceneConfig& cfg) {
  if (cfg.num_objects < 0 || cfg.num_frames < 0 || cfg.num_clutter < 0) {
    throw std::invalid_argument("SceneConfig: negative counts");
  }
  if (!(cfg.points_density >= 0) || !(cfg.noise_sigma >= 0) || !(cfg.top_face_weight >= 0)) {
    throw std::invalid_argument("SceneConfig: negative density or noise");
  }
  double total = 0;
  for (double p : cfg.bucket_mix) {
    if (p < 0) throw std::invalid_argument("SceneConfig: negative bucket probability");
    total += p;
  }
  if (cfg.num_objects > 0 && cfg.objects.empty() && total <= 0) {
    throw std::invalid_argument("SceneConfig: bucket mix sums to zero");
  }
  auto check_range = [](const std::array<double, 2>& r, const char* what) {
    if (!(r[0] > 0 && r[1] >= r[0])) throw std::invalid_argument(std::string("SceneConfig: bad ") + what);
  };
  check_range(cfg.length_range, "length range");
  check_range(cfg.width_range, "width range");
  check_range(cfg.height_range, "height range");
}

// Lowered hood over the front quarter: the region above 0.6 h in front of x = l/4 is empty.
bool in_cutout(const Eigen::Vector3d& local, const Box7& b) {
  const double hood_x = 0.25 * b.length;
  const double hood_top = -0.5 * b.height + 0.6 * b.height;
  return local.x() > hood_x && local.z() > hood_top;
}

}  // namespace

RenderedPoints render_frame_points(const std::vector<Box7>& boxes, const Eigen::Vector3d& sensor,
                                   const SceneConfig& cfg, std::mt19937_64& rng) {
  if (!(cfg.points_density >= 0) || !(cfg.noise_sigma >= 0)) {
    throw std::invalid_argument("render_frame_points: negative density or noise");
  }
  RenderedPoints out;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (std::size_t bi = 0; bi < boxes.size(); ++bi) {
    const Box7& b = boxes[bi];
    const Eigen::Vector3d s = b.to_local(sensor);
    const double hl = 0.5 * b.length, hw = 0.5 * b.width, hh = 0.5 * b.height;
    if (std::abs(s.x()) <= hl && std::abs(s.y()) <= hw) {
      ++out.skipped_inside;
      continue;
    }
    const std::array<Face, 4> faces = {Face{{1, 0}, hl, hw, false}, Face{{-1, 0}, hl, hw, false},
                                       Face{{0, 1}, hw, hl, true}, Face{{0, -1}, hw, hl, true}};
    std::array<double, 5> weight{};
    for (int f = 0; f < 4; ++f) {
      const Eigen::Vector2d center = faces[f].normal * faces[f].offset;
      const Eigen::Vector2d to_sensor = Eigen::Vector2d(s.x(), s.y()) - center;
      const double facing = faces[f].normal.dot(to_sensor);
      if (facing > 0) {
        const double area = 2.0 * faces[f].extent * b.height;
        weight[f] = area * facing / to_sensor.norm();
      }
    }
    weight[4] = cfg.top_face_weight * b.length * b.width;
    double wsum = 0;
    for (double w : weight) wsum += w;
    if (wsum <= 0) continue;

    const double dist = std::max(1.0, std::hypot(sensor.x() - b.cx, sensor.y() - b.cy));
    std::poisson_distribution<int> count_dist(cfg.points_density / dist);
    const int count = cfg.points_density > 0 ? count_dist(rng) : 0;
    std::discrete_distribution<int> face_dist(weight.begin(), weight.end());
    for (int k = 0; k < count; ++k) {
      const int f = face_dist(rng);
      Eigen::Vector3d local;
      for (int attempt = 0; attempt < 64; ++attempt) {
        if (f == 4) {
          local = {(unit(rng) - 0.5) * b.length, (unit(rng) - 0.5) * b.width, hh};
          if (cfg.vehicle_silhouette && local.x() > 0.25 * b.length) local.z() = -hh + 0.6 * b.height;
        } else {
          const Face& face = faces[f];
          const double along = (unit(rng) - 0.5) * 2.0 * face.extent;
          const double z = (unit(rng) - 0.5) * b.height;
          if (face.along_length) {
            local = {along, face.normal.y() * face.offset, z};
          } else {
            local = {face.normal.x() * face.offset, along, z};
          }
        }
        if (!cfg.vehicle_silhouette || f == 4 || !in_cutout(local, b)) break;
      }
      if (cfg.vehicle_silhouette && f != 4 && in_cutout(local, b)) continue;
      const Eigen::Vector3d clean = b.to_world(local);
      Eigen::Vector3d noisy = clean;
      if (cfg.noise_sigma > 0) {
        noisy += cfg.noise_sigma * Eigen::Vector3d(noise(rng), noise(rng), noise(rng));
      }
      out.clean.push_back(clean);
      out.points.push_back(noisy);
      out.source.push_back(static_cast<int>(bi));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------------------------

namespace {

struct Track {
  Box7 box0;  // world box at frame 0
  double vx, vy;
  bool labeled;
};

Box7 box_at(const Track& tr, int frame) {
  Box7 b = tr.box0;
  b.cx += tr.vx * kFramePeriod * frame;
  b.cy += tr.vy * kFramePeriod * frame;
  return b;
}

Box7 inflated(const Box7& b, double margin) {
  Box7 o = b;
  o.length += 2 * margin;
  o.width += 2 * margin;
  return o;
}

}  // namespace

Sequence generate_sequence(const SceneConfig& cfg) {
  validate(cfg);
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  const int nf = cfg.num_frames;
  std::vector<Pose> poses;
  for (int t = 0; t < nf; ++t) poses.push_back(Pose::from_xyz_yaw(cfg.ego_speed * kFramePeriod * t, 0, 0, 0));

  std::vector<Track> tracks;
  auto fits = [&](const Track& cand) {
    for (int t = 0; t < nf; ++t) {
      const Box7 b = box_at(cand, t);
      const Eigen::Vector3d sensor_world = poses[t].apply(cfg.sensor);
      const Eigen::Vector3d s = b.to_local(sensor_world);
      if (std::abs(s.x()) <= 0.5 * b.length + cfg.min_sensor_clearance &&
          std::abs(s.y()) <= 0.5 * b.width + cfg.min_sensor_clearance) {
        return false;
      }
      for (const auto& other : tracks) {
        if (iou_bev(inflated(b, 0.3), inflated(box_at(other, t), 0.3)) > 0.0) return false;
      }
    }
    return true;
  };

  if (!cfg.objects.empty()) {
    for (const auto& spec : cfg.objects) tracks.push_back({spec.box, spec.vx, spec.vy, true});
  } else if (nf > 0) {
    std::discrete_distribution<int> bucket_dist(cfg.bucket_mix.begin(), cfg.bucket_mix.end());
    const Pose& last = poses[nf - 1];
    auto place = [&](bool labeled) {
      for (int attempt = 0; attempt < 200; ++attempt) {
        double l, w, h, speed = 0.0;
        if (labeled) {
          const int bucket = bucket_dist(rng);
          speed = uniform(cfg.bucket_speed[bucket][0], cfg.bucket_speed[bucket][1]);
          l = uniform(cfg.length_range[0], cfg.length_range[1]);
          w = uniform(cfg.width_range[0], cfg.width_range[1]);
          h = uniform(cfg.height_range[0], cfg.height_range[1]);
        } else {
          l = uniform(0.3, 1.5);
          w = uniform(0.3, 1.5);
          h = uniform(0.8, 2.5);
        }
        const double heading = uniform(-kPi, kPi);
        const double e = cfg.spawn_half_extent;
        const Eigen::Vector3d end_local(uniform(-e, e), uniform(-e, e), 0.5 * h);
        const Eigen::Vector3d end_world = last.apply(end_local);
        const double vx = speed * std::cos(heading), vy = speed * std::sin(heading);
        const double back = kFramePeriod * (nf - 1);
        Track cand{Box7(end_world.x() - vx * back, end_world.y() - vy * back, end_world.z(), l, w, h, heading),
                   vx, vy, labeled};
        if (fits(cand)) {
          tracks.push_back(cand);
          return;
        }
      }
    };
    for (int k = 0; k < cfg.num_objects; ++k) place(true);
    for (int k = 0; k < cfg.num_clutter; ++k) place(false);
  }

  Sequence seq;
  seq.reserve(nf);
  for (int t = 0; t < nf; ++t) {
    FrameRecord fr;
    fr.timestamp = kFramePeriod * t;
    fr.ego_pose = poses[t];
    const Pose ego_from_world = poses[t].inverse();
    const Eigen::Matrix3d rot = ego_from_world.matrix().topLeftCorner<3, 3>();
    std::vector<Box7> boxes;
    for (std::size_t k = 0; k < tracks.size(); ++k) {
      const Box7 local = float_exact(transform_box(box_at(tracks[k], t), ego_from_world.matrix()));
      boxes.push_back(local);
      if (tracks[k].labeled) {
        const Eigen::Vector3d v = rot * Eigen::Vector3d(tracks[k].vx, tracks[k].vy, 0.0);
        fr.gt.push_back({local, static_cast<double>(static_cast<float>(v.x())),
                         static_cast<double>(static_cast<float>(v.y())), static_cast<std::uint32_t>(k)});
      }
    }
    const auto rendered = render_frame_points(boxes, cfg.sensor, cfg, rng);
    fr.points.reserve(rendered.points.size());
    for (const auto& p : rendered.points) {
      fr.points.push_back({static_cast<float>(p.x()), static_cast<float>(p.y()), static_cast<float>(p.z())});
    }
    seq.push_back(std::move(fr));
  }
  return seq;
}

}  // namespace m3d
