#pragma once

#include "m3d/geometry.hpp"
#include "m3d/scene_sim.hpp"

#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace m3d {

struct Detection {
  Box7 box;
  double score = 0.0;
};

/// Result of greedy matching for one scene.
struct MatchLabels {
  std::vector<std::uint8_t> tp;      // per prediction (input order)
  std::vector<int> matched_gt;       // per prediction, -1 for false positives
  std::vector<double> heading_error; // per prediction, |wrapped dtheta| for TPs, 0 otherwise
  int num_gt = 0;
  int true_positives = 0, false_positives = 0, false_negatives = 0;
};

/// Descending-score greedy matching; each prediction takes its best unmatched gt and is a TP iff
/// that IoU >= threshold. Equal scores keep input order; equal IoUs prefer the lower gt index.
MatchLabels match_detections(std::span<const Detection> preds, std::span<const Box7> gts, double iou_threshold,
                             IouKind kind = IouKind::kVolume);

/// One scored prediction entry pooled across scenes for AP integration.
struct ScoredLabel {
  double score = 0.0;
  bool tp = false;
  double heading_weight = 1.0;  // max(0, 1 - |dtheta| / pi) for TPs
};

struct PrPoint {
  double recall = 0.0, precision = 0.0;
};

/// All-point AP with precision envelope; nullopt when num_gt == 0.
std::optional<double> average_precision(std::span<const ScoredLabel> labels, int num_gt);
/// Same integral with each TP counted with its heading weight.
std::optional<double> aph(std::span<const ScoredLabel> labels, int num_gt);
std::vector<PrPoint> pr_curve(std::span<const ScoredLabel> labels, int num_gt);

double heading_weight(double heading_error);

struct RangeBin {
  double lo = 0.0, hi = 0.0;  // [lo, hi), hi may be +inf
  std::string name() const;
};

struct EvalConfig {
  std::vector<double> thresholds = {0.7};
  std::vector<RangeBin> range_bins = {{0, 30}, {30, 50}, {50, std::numeric_limits<double>::infinity()}};
  VelocityBuckets velocity;
  IouKind iou_kind = IouKind::kVolume;

  /// Throws std::invalid_argument for thresholds outside (0, 1] or unordered/overlapping bins.
  void validate() const;
};

struct EvalScene {
  std::vector<Detection> preds;
  std::vector<GtObject> gts;  // ego frame, with velocity
};

struct MetricRow {
  std::string metric;    // "AP" or "APH"
  double threshold = 0.0;
  std::string breakdown; // "overall", "range:0-30", "velocity:fast", ...
  std::optional<double> value;
  int tp = 0, fp = 0, fn = 0, num_gt = 0;
};

struct MetricReport {
  std::vector<MetricRow> rows;
  struct Curve {
    double threshold = 0.0;
    std::vector<PrPoint> points;
  };
  std::vector<Curve> curves;  // overall PR curve per threshold

  /// nullopt if missing or absent.
  std::optional<double> get(const std::string& metric, double threshold, const std::string& breakdown) const;
  const MetricRow* find(const std::string& metric, double threshold, const std::string& breakdown) const;
  /// "metric/threshold/breakdown = value" lines; absent values print as "absent".
  std::string to_text() const;
  /// {"schema": ..., "rows": [{"metric", "threshold", "breakdown", "value"|null, "tp", "fp", "fn", "num_gt"}],
  ///  "curves": [{"threshold", "recall": [...], "precision": [...]}]}
  std::string to_json() const;
};

/// Overall, per-range-bin and per-velocity-bucket AP/APH for every threshold. Predictions are
/// assigned to the bucket of their matched gt, or of the nearest gt (BEV center distance) when
/// unmatched; predictions in scenes without gts only count toward "overall".
MetricReport breakdown_report(std::span<const EvalScene> scenes, const EvalConfig& cfg);

}  // namespace m3d
