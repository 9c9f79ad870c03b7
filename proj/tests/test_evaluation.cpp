#include "m3d/evaluation.hpp"

#include "support/oracles.hpp"

#include <gtest/gtest.h>

#include <json.hpp>

#include <random>

using namespace m3d;

namespace {

ScoredLabel tp(double s, double w = 1.0) { return {s, true, w}; }
ScoredLabel fp(double s) { return {s, false, 0.0}; }

GtObject gt_at(double x, double y, double speed = 0.0, double heading = 0.0) {
  GtObject g;
  g.box = Box7(x, y, 0.8, 4, 2, 1.6, heading);
  g.vx = speed;
  return g;
}

// Greedy matching written as a repeated arg-max over the remaining predictions.
MatchLabels greedy_oracle(const std::vector<Detection>& preds, const std::vector<Box7>& gts, double thr) {
  MatchLabels m;
  m.tp.assign(preds.size(), 0);
  m.matched_gt.assign(preds.size(), -1);
  std::vector<bool> used(preds.size(), false), taken(gts.size(), false);
  for (std::size_t round = 0; round < preds.size(); ++round) {
    int p = -1;
    for (std::size_t i = 0; i < preds.size(); ++i)
      if (!used[i] && (p < 0 || preds[i].score > preds[p].score)) p = static_cast<int>(i);
    used[p] = true;
    int g = -1;
    double best = -1;
    for (std::size_t j = 0; j < gts.size(); ++j) {
      if (taken[j]) continue;
      const double v = iou_3d(preds[p].box, gts[j]);
      if (v > best) {
        best = v;
        g = static_cast<int>(j);
      }
    }
    if (g >= 0 && best >= thr) {
      taken[g] = true;
      m.tp[p] = 1;
      m.matched_gt[p] = g;
    }
  }
  return m;
}

std::vector<EvalScene> random_scenes(std::mt19937_64& rng, int count) {
  std::uniform_real_distribution<double> pos(-30, 30), jitter(-0.6, 0.6), score(0, 1), speed(0, 9), ang(-kPi, kPi);
  std::uniform_int_distribution<int> ngt(0, 5), nfp(0, 3);
  std::vector<EvalScene> scenes(count);
  for (auto& s : scenes) {
    const int n = ngt(rng);
    for (int i = 0; i < n; ++i) s.gts.push_back(gt_at(pos(rng), pos(rng), speed(rng), ang(rng)));
    for (const auto& g : s.gts)
      if (score(rng) < 0.8) {
        const Box7& b = g.box;
        s.preds.push_back({Box7(b.cx + jitter(rng), b.cy + jitter(rng), b.cz, b.length, b.width, b.height, b.heading + jitter(rng)), score(rng)});
      }
    const int f = nfp(rng);
    for (int i = 0; i < f; ++i) s.preds.push_back({Box7(pos(rng), pos(rng), 0.8, 4, 2, 1.6, ang(rng)), score(rng)});
  }
  return scenes;
}

}  // namespace

TEST(MatchDetections, Examples) {
  const std::vector<Box7> gts = {Box7(0, 0, 0, 4, 2, 2, 0), Box7(10, 0, 0, 4, 2, 2, 0)};
  const std::vector<Detection> preds = {{Box7(0, 0, 0, 4, 2, 2, 0), 0.6}, {Box7(0.2, 0, 0, 4, 2, 2, 0), 0.9}, {Box7(30, 0, 0, 4, 2, 2, 0), 0.8}};
  const auto m = match_detections(preds, gts, 0.7);
  // the higher-scored duplicate takes the gt first
  EXPECT_EQ(m.tp, (std::vector<std::uint8_t>{0, 1, 0}));
  EXPECT_EQ(m.matched_gt, (std::vector<int>{-1, 0, -1}));
  EXPECT_EQ(m.true_positives, 1);
  EXPECT_EQ(m.false_positives, 2);
  EXPECT_EQ(m.false_negatives, 1);

  const std::vector<Detection> turned = {{Box7(0, 0, 0, 4, 2, 2, kPi / 2 + 0.0), 0.5}};
  const std::vector<Box7> one = {Box7(0, 0, 0, 4, 4, 2, 0)};
  const auto h = match_detections(turned, one, 0.3);
  ASSERT_TRUE(h.tp[0]);
  EXPECT_NEAR(h.heading_error[0], kPi / 2, 1e-12);
  EXPECT_NEAR(heading_weight(h.heading_error[0]), 0.5, 1e-12);
}

TEST(EvaluationProps, GreedyMatchesOracle) {
  std::mt19937_64 rng(1);
  for (const auto& s : random_scenes(rng, 500)) {
    std::vector<Box7> boxes;
    for (const auto& g : s.gts) boxes.push_back(g.box);
    for (double thr : {0.3, 0.5, 0.7}) {
      const auto a = match_detections(s.preds, boxes, thr);
      const auto b = greedy_oracle(s.preds, boxes, thr);
      ASSERT_EQ(a.tp, b.tp);
      ASSERT_EQ(a.matched_gt, b.matched_gt);
    }
  }
}

TEST(AveragePrecision, CraftedFivePredictions) {
  // ranks: TP FP TP FP TP with 4 gts; heading weights 1, 0.5, 0.75 on the TPs
  const std::vector<ScoredLabel> labels = {fp(0.6), tp(0.7, 0.5), tp(0.9, 1.0), tp(0.5, 0.75), fp(0.8)};
  EXPECT_NEAR(*average_precision(labels, 4), 17.0 / 30.0, 1e-12);
  EXPECT_NEAR(*aph(labels, 4), 0.396875, 1e-12);
  const auto pr = pr_curve(labels, 4);
  ASSERT_EQ(pr.size(), 5u);
  EXPECT_NEAR(pr[2].precision, 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(pr[4].recall, 0.75, 1e-12);
}

TEST(AveragePrecision, EdgeCases) {
  EXPECT_FALSE(average_precision({}, 0).has_value());
  EXPECT_FALSE(aph(std::vector<ScoredLabel>{fp(0.3)}, 0).has_value());
  EXPECT_EQ(*average_precision({}, 3), 0.0);
  const std::vector<ScoredLabel> perfect = {tp(0.9), tp(0.8)};
  EXPECT_EQ(*average_precision(perfect, 2), 1.0);
  EXPECT_EQ(*average_precision(perfect, 4), 0.5);
}

TEST(EvaluationProps, ApMonotoneInThresholdAndAphBounded) {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 100; ++t) {
    const auto scenes = random_scenes(rng, 10);
    EvalConfig cfg;
    cfg.thresholds = {0.1, 0.3, 0.5, 0.7, 0.9};
    const auto rep = breakdown_report(scenes, cfg);
    double prev = 2.0;
    for (double thr : cfg.thresholds) {
      const auto ap = rep.get("AP", thr, "overall");
      if (!ap) continue;
      ASSERT_LE(*ap, prev + 1e-12);
      prev = *ap;
      for (const auto& row : rep.rows) {
        if (row.metric != "AP" || row.threshold != thr || !row.value) continue;
        ASSERT_LE(*rep.get("APH", thr, row.breakdown), *row.value + 1e-12);
        ASSERT_GE(*row.value, 0.0);
        ASSERT_LE(*row.value, 1.0);
      }
    }
  }
}

TEST(EvaluationProps, ScoreScaleInvariance) {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 50; ++t) {
    auto scenes = random_scenes(rng, 8);
    EvalConfig cfg;
    cfg.thresholds = {0.5};
    const auto a = breakdown_report(scenes, cfg);
    for (auto& s : scenes)
      for (auto& p : s.preds) p.score = 0.1 + 0.5 * p.score * p.score * p.score;
    const auto b = breakdown_report(scenes, cfg);
    ASSERT_EQ(a.rows.size(), b.rows.size());
    for (std::size_t i = 0; i < a.rows.size(); ++i) ASSERT_EQ(a.rows[i].value, b.rows[i].value);
  }
}

TEST(BreakdownReport, RowsAndAbsentBuckets) {
  EvalScene s;
  s.gts = {gt_at(5, 0, 0.0), gt_at(40, 0, 0.5)};
  s.preds = {{s.gts[0].box, 0.9}, {Box7(39, 3, 0.8, 4, 2, 1.6, 0), 0.4}};
  EvalConfig cfg;
  cfg.thresholds = {0.3, 0.5, 0.7};
  const std::vector<EvalScene> scenes = {s};
  const auto rep = breakdown_report(scenes, cfg);
  EXPECT_EQ(rep.rows.size(), 3u * 8 * 2);
  EXPECT_EQ(rep.curves.size(), 3u);
  EXPECT_NEAR(*rep.get("AP", 0.7, "overall"), 0.5, 1e-12);
  EXPECT_NEAR(*rep.get("AP", 0.5, "range:0-30"), 1.0, 1e-12);
  // the unmatched prediction near the far gt counts as that gt's false positive
  const MetricRow* far = rep.find("AP", 0.5, "range:30-50");
  ASSERT_NE(far, nullptr);
  EXPECT_EQ(far->fp, 1);
  EXPECT_EQ(*far->value, 0.0);
  EXPECT_TRUE(rep.get("AP", 0.5, "velocity:slow").has_value());
  EXPECT_FALSE(rep.get("AP", 0.5, "velocity:fast").has_value());
  EXPECT_FALSE(rep.get("AP", 0.5, "range:50-inf").has_value());
  EXPECT_NE(rep.to_text().find("AP/0.50/velocity:fast = absent"), std::string::npos);
  const auto j = nlohmann::json::parse(rep.to_json());
  EXPECT_EQ(j["schema"], "m3d.metrics.v1");
  bool saw_null = false;
  for (const auto& row : j["rows"])
    if (row["breakdown"] == "velocity:fast") saw_null = row["value"].is_null();
  EXPECT_TRUE(saw_null);
}

TEST(BreakdownReport, ScenesWithoutGtsOnlyCountOverall) {
  EvalScene empty;
  empty.preds = {{Box7(1, 1, 0.8, 4, 2, 1.6, 0), 0.8}};
  EvalScene one;
  one.gts = {gt_at(3, 3)};
  one.preds = {{one.gts[0].box, 0.7}};
  const std::vector<EvalScene> scenes = {empty, one};
  EvalConfig cfg;
  cfg.thresholds = {0.5};
  const auto rep = breakdown_report(scenes, cfg);
  EXPECT_EQ(rep.find("AP", 0.5, "overall")->fp, 1);
  EXPECT_NEAR(*rep.get("AP", 0.5, "overall"), 0.5, 1e-12);
  EXPECT_EQ(rep.find("AP", 0.5, "range:0-30")->fp, 0);
  EXPECT_EQ(*rep.get("AP", 0.5, "velocity:stationary"), 1.0);
}

TEST(EvalConfig, Validation) {
  EvalConfig c;
  EXPECT_NO_THROW(c.validate());
  c.thresholds = {0.0};
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c.thresholds = {1.1};
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c.thresholds = {0.5};
  c.range_bins = {{0, 30}, {20, 40}};
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c.range_bins = {{10, 5}};
  EXPECT_THROW(c.validate(), std::invalid_argument);
  EXPECT_THROW(breakdown_report({}, c), std::invalid_argument);
}

TEST(VelocityBuckets, Boundaries) {
  VelocityBuckets b;
  EXPECT_EQ(b.classify(0.0), VelocityBuckets::kStationary);
  EXPECT_EQ(b.classify(0.2), VelocityBuckets::kSlow);
  EXPECT_EQ(b.classify(1.0), VelocityBuckets::kMedium);
  EXPECT_EQ(b.classify(4.999), VelocityBuckets::kMedium);
  EXPECT_EQ(b.classify(5.0), VelocityBuckets::kFast);
  EXPECT_STREQ(VelocityBuckets::name(3), "fast");
}
