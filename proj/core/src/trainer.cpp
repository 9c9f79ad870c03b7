#include "m3d/trainer.hpp"

#include "m3d/errors.hpp"

#include <json.hpp>

#include <cmath>
#include <ostream>
#include <stdexcept>

namespace m3d {

void TrainConfig::validate() const {
  if (window < 1 || window_stride < 1) throw std::invalid_argument("TrainConfig: window and stride must be >= 1");
  if (frames < window) throw std::invalid_argument("TrainConfig: frames per example must be >= window size");
  if ((frames - window) % window_stride != 0) {
    throw std::invalid_argument("TrainConfig: frames - window must be a multiple of the window stride");
  }
  if (batch_size < 1 || steps < 0) throw std::invalid_argument("TrainConfig: bad batch size or step count");
  if (log_interval < 1) throw std::invalid_argument("TrainConfig: log interval must be >= 1");
}

int TrainConfig::num_windows() const { return (frames - window) / window_stride + 1; }

std::vector<Window> window_frames(std::span<const FrameRecord> frames, int window, int stride, int first_index) {
  TrainConfig probe;
  probe.frames = static_cast<int>(frames.size());
  probe.window = window;
  probe.window_stride = stride;
  probe.validate();
  std::vector<Window> out;
  for (int start = 0; start + window <= probe.frames; start += stride) {
    const int last = start + window - 1;
    Window w;
    w.pose = frames[last].ego_pose;
    w.frame_index = first_index + last;
    w.gts = frames[last].gt;
    const Pose inv = w.pose.inverse();
    for (int f = start; f <= last; ++f) {
      const Pose rel = inv * frames[f].ego_pose;
      const bool identity = f == last;
      for (const auto& p : frames[f].points) {
        const Eigen::Vector3d v(p[0], p[1], p[2]);
        w.points.push_back(identity ? v : rel.apply(v));
      }
    }
    out.push_back(std::move(w));
  }
  return out;
}

std::vector<Window> make_example(const Sequence& seq, int end_frame, const TrainConfig& cfg) {
  const int first = end_frame - cfg.frames + 1;
  if (first < 0 || end_frame >= static_cast<int>(seq.size())) {
    throw DataError("make_example: sequence too short for " + std::to_string(cfg.frames) + " frames");
  }
  return window_frames(std::span<const FrameRecord>(seq).subspan(first, cfg.frames), cfg.window, cfg.window_stride, first);
}

Eigen::Matrix4d Augmentation::matrix() const {
  Eigen::Matrix4d m = Pose::from_xyz_yaw(0, 0, 0, yaw).matrix();
  if (flip) m.col(1) = -m.col(1);
  return m;
}

void augment(std::vector<Window>& example, const Augmentation& aug) {
  const Eigen::Matrix4d a = aug.matrix();
  const Eigen::Matrix3d r = a.topLeftCorner<3, 3>();
  const Eigen::Matrix4d a_inv = Pose(a).inverse().matrix();
  for (auto& w : example) {
    for (auto& p : w.points) p = r * p;
    for (auto& g : w.gts) {
      g.box = transform_box(g.box, a);
      const Eigen::Vector3d v = r * Eigen::Vector3d(g.vx, g.vy, 0.0);
      g.vx = v.x();
      g.vy = v.y();
    }
    w.pose = Pose(w.pose.matrix() * a_inv);
  }
}

// ---------------------------------------------------------------------------------------------

Trainer::Trainer(Model& model, const TrainConfig& cfg)
    : model_(&model), cfg_(cfg), adam_(model.params(), nn::AdamOptions{0.9, 0.999, 1e-8, cfg.grad_clip}),
      rng_(derive_seed(cfg.seed, 7, 0)) {
  cfg_.validate();
}

double Trainer::lr_at(std::int64_t step) const {
  const auto start = static_cast<std::int64_t>(std::llround(cfg_.decay_start * cfg_.steps));
  const auto end = static_cast<std::int64_t>(std::llround(cfg_.decay_end * cfg_.steps));
  return nn::exponential_decay_lr(cfg_.lr, step, start, end, cfg_.decay_final);
}

StepResult Trainer::train_step(std::span<const std::vector<Window>> batch) {
  if (batch.empty()) throw std::invalid_argument("train_step: empty batch");
  for (const auto& e : model_->params().entries()) {
    if (!e.var.value().allFinite()) throw NumericalError("non-finite values in parameter '" + e.name + "'");
  }
  model_->params().zero_grad();
  StepResult r;
  r.step = adam_.steps() + 1;
  const bool warmup = r.step <= cfg_.fsd_warmup;
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (const auto& ex : batch) {
    const ForwardResult fwd = model_->forward(ex);
    const LossBundle lb = model_->loss(fwd, ex);
    if (!lb.finite()) {
      throw NumericalError("non-finite loss at step " + std::to_string(r.step) + ": " + lb.describe());
    }
    ag::backward(warmup ? lb.fsd : lb.total, ag::Mat::Constant(1, 1, inv));
    r.l_fsd += lb.l_fsd() * inv;
    r.l_mvaa += lb.l_mvaa() * inv;
    r.l_cv += lb.l_cv() * inv;
    r.l_total += lb.l_total() * inv;
  }
  r.lr = lr_at(r.step);
  r.grad_norm = adam_.step(r.lr);
  if (!std::isfinite(r.grad_norm)) {
    throw NumericalError("non-finite gradient norm at step " + std::to_string(r.step));
  }
  if (log_ && r.step % cfg_.log_interval == 0) {
    nlohmann::ordered_json j;
    j["step"] = r.step;
    j["L_fsd"] = r.l_fsd;
    j["L_mvaa"] = r.l_mvaa;
    j["L_cv"] = r.l_cv;
    j["L_total"] = r.l_total;
    j["lr"] = r.lr;
    *log_ << j.dump() << "\n";
    log_->flush();
  }
  return r;
}

StepResult Trainer::train_step(std::span<const Sequence> data) {
  std::vector<const Sequence*> usable;
  for (const auto& s : data)
    if (static_cast<int>(s.size()) >= cfg_.frames) usable.push_back(&s);
  if (usable.empty()) throw DataError("train_step: no sequence has enough frames");
  std::vector<std::vector<Window>> batch;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int b = 0; b < cfg_.batch_size; ++b) {
    const Sequence& seq = *usable[std::uniform_int_distribution<std::size_t>(0, usable.size() - 1)(rng_)];
    const int end = std::uniform_int_distribution<int>(cfg_.frames - 1, static_cast<int>(seq.size()) - 1)(rng_);
    auto ex = make_example(seq, end, cfg_);
    Augmentation aug;
    aug.flip = cfg_.flip && unit(rng_) < 0.5;
    aug.yaw = cfg_.rotate ? (2.0 * unit(rng_) - 1.0) * cfg_.rotate_max : 0.0;
    augment(ex, aug);
    batch.push_back(std::move(ex));
  }
  return train_step(batch);
}

// ---------------------------------------------------------------------------------------------

std::vector<EvalScene> inference_scenes(const Model& model, std::span<const Sequence> data, const TrainConfig& cfg,
                                        double score_threshold) {
  std::vector<EvalScene> scenes;
  for (const auto& seq : data) {
    const auto ex = make_example(seq, static_cast<int>(seq.size()) - 1, cfg);
    EvalScene s;
    s.preds = model.detect(ex, score_threshold);
    s.gts = window_target_objects(ex.back(), model.config().grid, model.config().min_points);
    scenes.push_back(std::move(s));
  }
  return scenes;
}

MetricReport evaluate(const Model& model, std::span<const Sequence> data, const TrainConfig& cfg,
                      const EvalConfig& eval, double score_threshold) {
  const auto scenes = inference_scenes(model, data, cfg, score_threshold);
  return breakdown_report(scenes, eval);
}

// ---------------------------------------------------------------------------------------------

namespace {

IouKind parse_iou(const std::string& s) {
  if (s == "3d") return IouKind::kVolume;
  if (s == "bev") return IouKind::kBev;
  throw std::invalid_argument("IoU kind must be 3d or bev, got '" + s + "'");
}

}  // namespace

SceneConfig scene_config_from(const RunConfig& rc) {
  SceneConfig c;
  c.num_objects = rc.get_int("scene.num_objects");
  c.num_frames = rc.get_int("scene.num_frames");
  const auto mix = rc.get_double_list("scene.bucket_mix");
  if (mix.size() != 4) throw std::invalid_argument("scene.bucket_mix needs 4 values");
  std::copy(mix.begin(), mix.end(), c.bucket_mix.begin());
  const double slow = rc.get_double("eval.velocity.slow"), medium = rc.get_double("eval.velocity.medium"),
               fast = rc.get_double("eval.velocity.fast"), fast_max = rc.get_double("scene.fast_max_speed");
  if (!(0 < slow && slow < medium && medium < fast && fast < fast_max)) {
    throw std::invalid_argument("velocity bucket edges must increase");
  }
  c.bucket_speed = {{{0.0, slow}, {slow, medium}, {medium, fast}, {fast, fast_max}}};
  c.points_density = rc.get_double("scene.points_density");
  c.noise_sigma = rc.get_double("scene.noise_sigma");
  c.top_face_weight = rc.get_double("scene.top_face_weight");
  c.vehicle_silhouette = rc.get_bool("scene.vehicle_silhouette");
  c.num_clutter = rc.get_int("scene.num_clutter");
  c.ego_speed = rc.get_double("scene.ego_speed");
  c.spawn_half_extent = rc.get_double("scene.spawn_half_extent");
  c.sensor = {0.0, 0.0, rc.get_double("scene.sensor_z")};
  c.seed = static_cast<std::uint64_t>(rc.get_int64("seed"));
  return c;
}

ModelConfig model_config_from(const RunConfig& rc) {
  ModelConfig m;
  m.grid.x_min = rc.get_double("grid.x_min");
  m.grid.x_max = rc.get_double("grid.x_max");
  m.grid.y_min = rc.get_double("grid.y_min");
  m.grid.y_max = rc.get_double("grid.y_max");
  m.grid.z_min = rc.get_double("grid.z_min");
  m.grid.z_max = rc.get_double("grid.z_max");
  m.grid.nx = rc.get_int("grid.nx");
  m.grid.ny = rc.get_int("grid.ny");
  m.grid.validate();
  m.pillar_widths = rc.get_int_list("model.pillar_widths");
  m.backbone.block_channels = rc.get_int_list("model.block_channels");
  m.backbone.block_layers = rc.get_int_list("model.block_layers");
  m.backbone.block_strides = rc.get_int_list("model.block_strides");
  m.backbone.up_channels = rc.get_int_list("model.up_channels");
  m.backbone.output_stride = rc.get_int("model.output_stride");
  m.coder.prior_length = rc.get_double("fsd.prior.length");
  m.coder.prior_width = rc.get_double("fsd.prior.width");
  m.coder.prior_height = rc.get_double("fsd.prior.height");
  m.coder.prior_z = rc.get_double("fsd.prior.z");
  m.coder.num_bins = rc.get_int("fsd.num_bins");
  if (m.coder.num_bins < 1) throw std::invalid_argument("fsd.num_bins must be >= 1");
  m.nms_kernel = rc.get_int("fsd.nms.kernel");
  m.num_proposals = rc.get_int("fsd.num_proposals");
  if (m.num_proposals < 1) throw std::invalid_argument("fsd.num_proposals must be >= 1");
  m.roi_k = rc.get_int("roi.k");
  m.min_points = rc.get_int("train.min_points");
  const std::string assign = rc.get("fsd.assign");
  if (assign == "hungarian") m.assign = AssignStrategy::kHungarian;
  else if (assign == "centeredness") m.assign = AssignStrategy::kCenteredness;
  else throw std::invalid_argument("fsd.assign must be hungarian or centeredness");
  m.loss.match_iou = parse_iou(rc.get("fsd.match_iou"));
  m.loss.beta = rc.get_double("loss.beta");
  m.loss.min_iou = rc.get_double("loss.min_iou");
  m.mvaa_enabled = rc.get_bool("mvaa.enabled");
  m.crossview = rc.get_bool("mvaa.crossview");
  m.include_target_view = rc.get_bool("mvaa.include_target");
  const std::string keys = rc.get("mvaa.keys");
  if (keys != "union" && keys != "per_frame") throw std::invalid_argument("mvaa.keys must be union or per_frame");
  m.union_keys = keys == "union";
  m.mvaa.attn_channels = rc.get_int("mvaa.attn_channels");
  m.mvaa.heads = rc.get_int("mvaa.heads");
  m.mvaa.residual = rc.get_bool("mvaa.residual");
  const std::string bias = rc.get("mvaa.bias");
  if (bias == "joint") m.mvaa.bias_mode = BiasMode::kJoint;
  else if (bias == "separate") m.mvaa.bias_mode = BiasMode::kSeparate;
  else throw std::invalid_argument("mvaa.bias must be joint or separate");
  m.seed = derive_seed(static_cast<std::uint64_t>(rc.get_int64("seed")), 3, 0);
  return m;
}

TrainConfig train_config_from(const RunConfig& rc) {
  TrainConfig t;
  t.frames = rc.get_int("train.frames");
  t.window = rc.get_int("train.window");
  t.window_stride = rc.get_int("train.window_stride");
  t.steps = rc.get_int("train.steps");
  t.batch_size = rc.get_int("train.batch_size");
  t.lr = rc.get_double("train.lr");
  t.decay_start = rc.get_double("train.decay_start");
  t.decay_end = rc.get_double("train.decay_end");
  t.decay_final = rc.get_double("train.decay_final");
  t.grad_clip = rc.get_double("train.grad_clip");
  t.flip = rc.get_bool("train.flip");
  t.rotate = rc.get_bool("train.rotate");
  t.rotate_max = rc.get_double("train.rotate_max");
  t.fsd_warmup = rc.get_int("train.fsd_warmup");
  t.log_interval = rc.get_int("train.log_interval");
  t.checkpoint_interval = rc.get_int("train.checkpoint_interval");
  t.seed = static_cast<std::uint64_t>(rc.get_int64("seed"));
  t.validate();
  return t;
}

EvalConfig eval_config_from(const RunConfig& rc) {
  EvalConfig e;
  e.thresholds = rc.get_double_list("eval.thresholds");
  const auto edges = rc.get_double_list("eval.range_bins");
  if (edges.size() < 2) throw std::invalid_argument("eval.range_bins needs at least two edges");
  e.range_bins.clear();
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) e.range_bins.push_back({edges[i], edges[i + 1]});
  e.velocity.slow_min = rc.get_double("eval.velocity.slow");
  e.velocity.medium_min = rc.get_double("eval.velocity.medium");
  e.velocity.fast_min = rc.get_double("eval.velocity.fast");
  e.iou_kind = parse_iou(rc.get("eval.iou"));
  e.validate();
  return e;
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t index) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(base) ^ stream) ^ index);
}

std::vector<Sequence> generate_dataset(const SceneConfig& base, int count, std::uint64_t seed, std::uint64_t stream) {
  std::vector<Sequence> out;
  out.reserve(static_cast<std::size_t>(std::max(0, count)));
  for (int i = 0; i < count; ++i) {
    SceneConfig c = base;
    c.seed = derive_seed(seed, stream, static_cast<std::uint64_t>(i));
    out.push_back(generate_sequence(c));
  }
  return out;
}

}  // namespace m3d
