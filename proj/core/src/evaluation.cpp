#include "m3d/evaluation.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace m3d {

MatchLabels match_detections(std::span<const Detection> preds, std::span<const Box7> gts, double iou_threshold,
                             IouKind kind) {
  MatchLabels out;
  out.num_gt = static_cast<int>(gts.size());
  out.tp.assign(preds.size(), 0);
  out.matched_gt.assign(preds.size(), -1);
  out.heading_error.assign(preds.size(), 0.0);
  std::vector<std::size_t> order(preds.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return preds[a].score > preds[b].score; });
  std::vector<std::uint8_t> taken(gts.size(), 0);
  for (std::size_t p : order) {
    int best = -1;
    double best_iou = -1.0;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (taken[g]) continue;
      const double v = iou(preds[p].box, gts[g], kind);
      if (v > best_iou) {
        best_iou = v;
        best = static_cast<int>(g);
      }
    }
    if (best >= 0 && best_iou >= iou_threshold) {
      taken[best] = 1;
      out.tp[p] = 1;
      out.matched_gt[p] = best;
      out.heading_error[p] = std::abs(wrap_angle(preds[p].box.heading - gts[best].heading));
      ++out.true_positives;
    } else {
      ++out.false_positives;
    }
  }
  out.false_negatives = out.num_gt - out.true_positives;
  return out;
}

double heading_weight(double heading_error) { return std::max(0.0, 1.0 - std::abs(heading_error) / kPi); }

namespace {

std::vector<std::size_t> score_order(std::span<const ScoredLabel> labels) {
  std::vector<std::size_t> order(labels.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return labels[a].score > labels[b].score; });
  return order;
}

std::optional<double> integrate(std::span<const ScoredLabel> labels, int num_gt, bool weighted) {
  if (num_gt <= 0) return std::nullopt;
  const auto order = score_order(labels);
  std::vector<double> recall, precision;
  double tp = 0.0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const ScoredLabel& l = labels[order[k]];
    if (l.tp) tp += weighted ? l.heading_weight : 1.0;
    recall.push_back(tp / num_gt);
    precision.push_back(tp / static_cast<double>(k + 1));
  }
  for (std::size_t k = precision.size(); k-- > 1;) precision[k - 1] = std::max(precision[k - 1], precision[k]);
  double ap = 0.0, prev = 0.0;
  for (std::size_t k = 0; k < recall.size(); ++k) {
    ap += (recall[k] - prev) * precision[k];
    prev = recall[k];
  }
  return ap;
}

}  // namespace

std::optional<double> average_precision(std::span<const ScoredLabel> labels, int num_gt) {
  return integrate(labels, num_gt, false);
}

std::optional<double> aph(std::span<const ScoredLabel> labels, int num_gt) { return integrate(labels, num_gt, true); }

std::vector<PrPoint> pr_curve(std::span<const ScoredLabel> labels, int num_gt) {
  std::vector<PrPoint> out;
  if (num_gt <= 0) return out;
  const auto order = score_order(labels);
  double tp = 0.0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (labels[order[k]].tp) tp += 1.0;
    out.push_back({tp / num_gt, tp / static_cast<double>(k + 1)});
  }
  return out;
}

std::string RangeBin::name() const {
  auto fmt = [](double v) {
    if (std::isinf(v)) return std::string("inf");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return std::string(buf);
  };
  return "range:" + fmt(lo) + "-" + fmt(hi);
}

void EvalConfig::validate() const {
  if (thresholds.empty()) throw std::invalid_argument("EvalConfig: no thresholds");
  for (double t : thresholds)
    if (!(t > 0.0 && t <= 1.0)) throw std::invalid_argument("EvalConfig: threshold outside (0, 1]");
  for (std::size_t i = 0; i < range_bins.size(); ++i) {
    if (!(range_bins[i].hi > range_bins[i].lo) || range_bins[i].lo < 0) throw std::invalid_argument("EvalConfig: empty range bin");
    if (i > 0 && range_bins[i].lo < range_bins[i - 1].hi) throw std::invalid_argument("EvalConfig: range bins overlap or are unordered");
  }
}

const MetricRow* MetricReport::find(const std::string& metric, double threshold, const std::string& breakdown) const {
  for (const auto& r : rows)
    if (r.metric == metric && std::abs(r.threshold - threshold) < 1e-12 && r.breakdown == breakdown) return &r;
  return nullptr;
}

std::optional<double> MetricReport::get(const std::string& metric, double threshold, const std::string& breakdown) const {
  const MetricRow* r = find(metric, threshold, breakdown);
  return r ? r->value : std::nullopt;
}

std::string MetricReport::to_text() const {
  std::ostringstream os;
  for (const auto& r : rows) {
    char thr[16];
    std::snprintf(thr, sizeof thr, "%.2f", r.threshold);
    os << r.metric << "/" << thr << "/" << r.breakdown << " = ";
    if (r.value) {
      char v[32];
      std::snprintf(v, sizeof v, "%.6f", *r.value);
      os << v;
    } else {
      os << "absent";
    }
    os << "  (tp " << r.tp << ", fp " << r.fp << ", fn " << r.fn << ", gt " << r.num_gt << ")\n";
  }
  return os.str();
}

std::string MetricReport::to_json() const {
  nlohmann::ordered_json j;
  j["schema"] = "m3d.metrics.v1";
  j["rows"] = nlohmann::ordered_json::array();
  for (const auto& r : rows) {
    nlohmann::ordered_json row;
    row["metric"] = r.metric;
    row["threshold"] = r.threshold;
    row["breakdown"] = r.breakdown;
    row["value"] = r.value ? nlohmann::ordered_json(*r.value) : nlohmann::ordered_json(nullptr);
    row["tp"] = r.tp;
    row["fp"] = r.fp;
    row["fn"] = r.fn;
    row["num_gt"] = r.num_gt;
    j["rows"].push_back(std::move(row));
  }
  j["curves"] = nlohmann::ordered_json::array();
  for (const auto& c : curves) {
    nlohmann::ordered_json cj;
    cj["threshold"] = c.threshold;
    std::vector<double> rec, prec;
    for (const auto& p : c.points) {
      rec.push_back(p.recall);
      prec.push_back(p.precision);
    }
    cj["recall"] = rec;
    cj["precision"] = prec;
    j["curves"].push_back(std::move(cj));
  }
  return j.dump(2) + "\n";
}

MetricReport breakdown_report(std::span<const EvalScene> scenes, const EvalConfig& cfg) {
  cfg.validate();
  std::vector<std::string> names = {"overall"};
  for (const auto& b : cfg.range_bins) names.push_back(b.name());
  for (int v = 0; v < 4; ++v) names.push_back(std::string("velocity:") + VelocityBuckets::name(v));
  const int nr = static_cast<int>(cfg.range_bins.size());

  auto gt_keys = [&](const GtObject& g) {
    std::vector<int> keys;
    const double r = std::hypot(g.box.cx, g.box.cy);
    for (int i = 0; i < nr; ++i)
      if (r >= cfg.range_bins[i].lo && r < cfg.range_bins[i].hi) keys.push_back(1 + i);
    keys.push_back(1 + nr + cfg.velocity.classify(g.speed()));
    return keys;
  };

  MetricReport report;
  for (double thr : cfg.thresholds) {
    struct Acc {
      std::vector<ScoredLabel> labels;
      int num_gt = 0, tp = 0, fp = 0;
    };
    std::vector<Acc> acc(names.size());
    for (const auto& scene : scenes) {
      std::vector<Box7> boxes;
      for (const auto& g : scene.gts) boxes.push_back(g.box);
      const MatchLabels m = match_detections(scene.preds, boxes, thr, cfg.iou_kind);
      std::vector<std::vector<int>> keys_of_gt;
      for (const auto& g : scene.gts) {
        keys_of_gt.push_back(gt_keys(g));
        ++acc[0].num_gt;
        for (int k : keys_of_gt.back()) ++acc[k].num_gt;
      }
      for (std::size_t p = 0; p < scene.preds.size(); ++p) {
        const ScoredLabel l{scene.preds[p].score, m.tp[p] != 0, m.tp[p] ? heading_weight(m.heading_error[p]) : 0.0};
        auto add = [&](int k) {
          acc[k].labels.push_back(l);
          (l.tp ? acc[k].tp : acc[k].fp)++;
        };
        add(0);
        int g = m.matched_gt[p];
        if (g < 0 && !scene.gts.empty()) {
          double best = std::numeric_limits<double>::infinity();
          for (std::size_t i = 0; i < scene.gts.size(); ++i) {
            const double d = std::hypot(scene.gts[i].box.cx - scene.preds[p].box.cx, scene.gts[i].box.cy - scene.preds[p].box.cy);
            if (d < best) {
              best = d;
              g = static_cast<int>(i);
            }
          }
        }
        if (g >= 0)
          for (int k : keys_of_gt[g]) add(k);
      }
    }
    for (std::size_t k = 0; k < names.size(); ++k) {
      const Acc& a = acc[k];
      for (const char* metric : {"AP", "APH"}) {
        MetricRow row;
        row.metric = metric;
        row.threshold = thr;
        row.breakdown = names[k];
        row.value = std::string(metric) == "AP" ? average_precision(a.labels, a.num_gt) : aph(a.labels, a.num_gt);
        row.tp = a.tp;
        row.fp = a.fp;
        row.fn = a.num_gt - a.tp;
        row.num_gt = a.num_gt;
        report.rows.push_back(row);
      }
    }
    report.curves.push_back({thr, pr_curve(acc[0].labels, acc[0].num_gt)});
  }
  return report;
}

}  // namespace m3d
