#pragma once

#include "m3d/evaluation.hpp"
#include "m3d/fsd.hpp"
#include "m3d/losses.hpp"
#include "m3d/memory_bank.hpp"
#include "m3d/mvaa.hpp"
#include "m3d/pillars.hpp"

#include <memory>

namespace m3d {

struct ModelConfig {
  PillarGrid grid;
  std::vector<int> pillar_widths = {64, 64};
  BackboneConfig backbone;
  FsdBoxCoder coder;
  int nms_kernel = 7;
  int num_proposals = 32;
  int roi_k = 7;
  int min_points = 1;  // window points a gt needs to be labeled
  AssignStrategy assign = AssignStrategy::kHungarian;

  bool mvaa_enabled = true;
  bool crossview = true;
  bool include_target_view = true;
  bool union_keys = true;
  MvaaConfig mvaa;  // channels are taken from the backbone output

  LossOptions loss;
  std::uint64_t seed = 0;
};

/// One FSD input: merged points in the window's (last frame's) ego frame.
struct Window {
  std::vector<Eigen::Vector3d> points;
  Pose pose;
  int frame_index = 0;
  std::vector<GtObject> gts;  // labels of the window's last frame
};

struct FsdResult {
  BevFeatureMap fmap;
  ag::Var head;
  ProposalSet proposals;
};

struct ForwardResult {
  std::vector<FsdResult> fsd;           // one per window, target last
  ag::Var target_features;              // F_t, N x C
  std::vector<ag::Var> views;           // V_s per view (stored frames in bank order, then target)
  std::vector<double> view_dt;          // frame deltas, target minus view
  std::vector<int> view_frames;
  ag::Var aggregation_weights;          // N x S
  bool used_mvaa = false;
  BoxHead::Output final_head;
  std::vector<BoxHead::Output> crossview;
  std::vector<Box7> final_boxes;

  const ProposalSet& target_proposals() const { return fsd.back().proposals; }
};

/// FSD -> memory bank -> MVAA -> box head, plus the cross-view heads.
class Model {
 public:
  explicit Model(const ModelConfig& cfg);

  const ModelConfig& config() const { return cfg_; }
  nn::ParameterStore& params() { return ps_; }
  const nn::ParameterStore& params() const { return ps_; }
  int feature_channels() const { return channels_; }

  FsdResult run_fsd(std::span<const Eigen::Vector3d> points) const;
  /// `windows` is time ordered; the last one is the prediction target.
  ForwardResult forward(std::span<const Window> windows) const;
  /// L_fsd is averaged over windows; the second-stage head term goes into L_mvaa.
  LossBundle loss(const ForwardResult& fwd, std::span<const Window> windows) const;
  /// Inference-mode detections for the target window (probabilities, thresholded).
  std::vector<Detection> detect(std::span<const Window> windows, double score_threshold) const;
  static std::vector<Detection> detections_from(const ForwardResult& fwd, double score_threshold);

 private:
  ModelConfig cfg_;
  nn::ParameterStore ps_;
  int channels_ = 0;
  PillarEncoder encoder_;
  Backbone backbone_;
  DenseHead head_;
  AlignmentAttention align_;
  AggregationAttention aggregate_;
  BoxHead box_head_;
  BoxHead cv_head_;
};

/// Labeled gts of a window: center inside the grid and at least `min_points` window points in
/// the box.
std::vector<Box7> window_targets(const Window& w, const PillarGrid& grid, int min_points);
std::vector<GtObject> window_target_objects(const Window& w, const PillarGrid& grid, int min_points);

}  // namespace m3d
