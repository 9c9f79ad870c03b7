#pragma once

#include "m3d/config.hpp"
#include "m3d/evaluation.hpp"
#include "m3d/model.hpp"
#include "m3d/nn.hpp"
#include "m3d/scene_sim.hpp"

#include <iosfwd>
#include <random>

namespace m3d {

struct TrainConfig {
  int frames = 4;          // F
  int window = 1;          // W
  int window_stride = 1;
  int steps = 2000;
  int batch_size = 4;
  double lr = 0.003;
  double decay_start = 0.1;  // fractions of `steps`
  double decay_end = 0.9;
  double decay_final = 0.1;
  double grad_clip = 10.0;
  bool flip = true;
  bool rotate = true;
  double rotate_max = kPi / 4;
  int fsd_warmup = 0;
  int log_interval = 10;
  int checkpoint_interval = 500;
  std::uint64_t seed = 0;

  /// Throws std::invalid_argument unless F >= W >= 1 and (F - W) is a multiple of the stride.
  void validate() const;
  int num_windows() const;
};

/// Consecutive windows of `window` frames ending at the last frame, one every `stride` frames.
/// Each window's points are merged into its last frame's ego coordinates. Frame indices are
/// `first_index` + position in `frames`.
std::vector<Window> window_frames(std::span<const FrameRecord> frames, int window, int stride, int first_index = 0);

/// Example ending at `end_frame` (inclusive) of `seq`, using the last cfg.frames frames.
std::vector<Window> make_example(const Sequence& seq, int end_frame, const TrainConfig& cfg);

/// Rigid (optionally reflected) transform applied to every window of an example: points and
/// boxes are mapped by A, poses become pose * A^-1 so relative motion is preserved.
struct Augmentation {
  bool flip = false;  // y -> -y
  double yaw = 0.0;
  Eigen::Matrix4d matrix() const;
};
void augment(std::vector<Window>& example, const Augmentation& aug);

struct StepResult {
  std::int64_t step = 0;
  double l_fsd = 0, l_mvaa = 0, l_cv = 0, l_total = 0;  // batch means
  double lr = 0, grad_norm = 0;
};

class Trainer {
 public:
  Trainer(Model& model, const TrainConfig& cfg);

  /// One optimizer step on the mean L_total over `batch`. Throws NumericalError with the
  /// per-term losses when any loss is non-finite.
  StepResult train_step(std::span<const std::vector<Window>> batch);
  /// Samples batch_size examples (with augmentation) from `data` and steps.
  StepResult train_step(std::span<const Sequence> data);

  double lr_at(std::int64_t step) const;
  std::int64_t step() const { return adam_.steps(); }
  nn::Adam& optimizer() { return adam_; }
  std::mt19937_64& rng() { return rng_; }
  const TrainConfig& config() const { return cfg_; }

  /// Line-delimited JSON records {step, L_fsd, L_mvaa, L_cv, L_total, lr} every log_interval steps.
  void set_log(std::ostream* os) { log_ = os; }

 private:
  Model* model_;
  TrainConfig cfg_;
  nn::Adam adam_;
  std::mt19937_64 rng_;
  std::ostream* log_ = nullptr;
};

/// One scene per sequence: the last F frames, detections for the final frame.
std::vector<EvalScene> inference_scenes(const Model& model, std::span<const Sequence> data, const TrainConfig& cfg,
                                        double score_threshold);
MetricReport evaluate(const Model& model, std::span<const Sequence> data, const TrainConfig& cfg,
                      const EvalConfig& eval, double score_threshold);

// -- configuration ---------------------------------------------------------------------------------

SceneConfig scene_config_from(const RunConfig& rc);
ModelConfig model_config_from(const RunConfig& rc);
TrainConfig train_config_from(const RunConfig& rc);
EvalConfig eval_config_from(const RunConfig& rc);

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t index);
/// `count` sequences; sequence i uses seed derive_seed(seed, stream, i).
std::vector<Sequence> generate_dataset(const SceneConfig& base, int count, std::uint64_t seed, std::uint64_t stream);
inline constexpr std::uint64_t kTrainStream = 1;
inline constexpr std::uint64_t kEvalStream = 2;

}  // namespace m3d
