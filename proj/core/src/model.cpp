#include "m3d/model.hpp"

#include <cmath>
#include <stdexcept>

namespace m3d {

Model::Model(const ModelConfig& cfg) : cfg_(cfg), ps_(cfg.seed) {
  cfg_.grid.validate();
  encoder_ = PillarEncoder(ps_, cfg_.grid, cfg_.pillar_widths);
  backbone_ = Backbone(ps_, encoder_.out_channels(), cfg_.backbone);
  channels_ = cfg_.backbone.out_channels();
  head_ = DenseHead(ps_, channels_, cfg_.coder);
  cfg_.mvaa.channels = channels_;
  if (cfg_.mvaa_enabled) {
    align_ = AlignmentAttention(ps_, "mvaa.align", cfg_.mvaa);
    aggregate_ = AggregationAttention(ps_, "mvaa.aggregate", cfg_.mvaa);
  }
  box_head_ = BoxHead(ps_, "head.box", channels_);
  if (cfg_.mvaa_enabled && cfg_.crossview) cv_head_ = BoxHead(ps_, "head.crossview", channels_);
}

FsdResult Model::run_fsd(std::span<const Eigen::Vector3d> points) const {
  const PillarAssignment pa = pillarize(points, cfg_.grid);
  const ag::Var pts = points_to_var(points);
  const ag::Var pillars = encoder_.pillar_features(pa, pts);
  const ag::Var dense = scatter_to_grid(pillars, pa, cfg_.grid);
  FsdResult r;
  r.fmap = backbone_.forward(dense, cfg_.grid);
  r.head = head_.forward(r.fmap);
  r.proposals = select_proposals(r.head.value(), r.fmap, cfg_.coder, cfg_.nms_kernel, cfg_.num_proposals);
  return r;
}

ForwardResult Model::forward(std::span<const Window> windows) const {
  if (windows.empty()) throw std::invalid_argument("Model::forward: no windows");
  ForwardResult fwd;
  for (const auto& w : windows) {
    fwd.fsd.push_back(run_fsd(w.points));
    fwd.fsd.back().proposals.frame_index = w.frame_index;
  }
  const Window& tw = windows.back();
  const FsdResult& target = fwd.fsd.back();
  const ProposalSet& tp = target.proposals;
  const int k = cfg_.roi_k;
  fwd.target_features = extract_roi_features(target.fmap, tp.boxes, k, tp.valid);

  ag::Var head_in = fwd.target_features;
  if (cfg_.mvaa_enabled) {
    MemoryBank bank(static_cast<int>(windows.size()) - 1);
    for (std::size_t i = 0; i + 1 < windows.size(); ++i) {
      bank.push(fwd.fsd[i].proposals, fwd.fsd[i].fmap, windows[i].pose, windows[i].frame_index);
    }
    std::vector<std::uint8_t> all_masked_any(tp.size(), 0);
    std::vector<std::vector<std::uint8_t>> masked;
    auto add_view = [&](const BevFeatureMap& fmap, const ProposalSet& own, const Pose& pose, int frame) {
      KeyBoxes keys = cfg_.union_keys ? union_in_frame(bank, tp, tw.pose, pose) : KeyBoxes{own.boxes, own.valid};
      const ag::Var fs = extract_roi_features(fmap, keys.boxes, k, keys.valid);
      const std::vector<Box7> bt = transform_boxes(tp.boxes, tw.pose, pose);
      const double dt = static_cast<double>(tw.frame_index - frame);
      auto out = align_.forward(fwd.target_features, bt, fs, keys.boxes, keys.valid, dt);
      fwd.views.push_back(out.values);
      fwd.view_dt.push_back(dt);
      fwd.view_frames.push_back(frame);
      masked.push_back(std::move(out.all_masked));
    };
    for (const auto& e : bank.entries()) add_view(e.fmap, e.proposals, e.pose, e.frame_index);
    if (cfg_.include_target_view) add_view(target.fmap, tp, tw.pose, tw.frame_index);

    if (!fwd.views.empty()) {
      Mask vm(static_cast<Eigen::Index>(tp.size()), static_cast<Eigen::Index>(fwd.views.size()));
      for (std::size_t s = 0; s < fwd.views.size(); ++s)
        for (std::size_t i = 0; i < tp.size(); ++i) vm(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(s)) = masked[s][i] ? 0 : 1;
      auto agg = aggregate_.forward(fwd.target_features, fwd.views, fwd.view_dt, vm);
      fwd.aggregation_weights = agg.weights;
      head_in = agg.features;
      fwd.used_mvaa = true;
      if (cfg_.crossview) fwd.crossview = crossview_heads(cv_head_, fwd.views);
    }
  }
  fwd.final_head = box_head_.forward(head_in);
  fwd.final_boxes = BoxHead::decode(fwd.final_head.residuals.value(), tp.boxes);
  return fwd;
}

LossBundle Model::loss(const ForwardResult& fwd, std::span<const Window> windows) const {
  if (windows.size() != fwd.fsd.size()) throw std::invalid_argument("Model::loss: window count mismatch");
  ag::Var l_fsd;
  double obj = 0, reg = 0, ori = 0;
  int count_c = 0, count_r = 0;
  for (std::size_t i = 0; i < windows.size(); ++i) {
    const auto gts = window_targets(windows[i], cfg_.grid, cfg_.min_points);
    const FsdResult& f = fwd.fsd[i];
    const FsdAssignment a = fsd_assign(f.proposals, gts, f.fmap, cfg_.loss.match_iou, cfg_.assign);
    const FsdLoss fl = fsd_loss(f.head, f.fmap, cfg_.coder, a, gts, cfg_.loss);
    l_fsd = i == 0 ? fl.total : ag::add(l_fsd, fl.total);
    obj += fl.objectness.item();
    reg += fl.regression.item();
    ori += fl.orientation.item();
    count_c += fl.num_sites;
    count_r += fl.num_positive;
  }
  const double inv = 1.0 / static_cast<double>(windows.size());
  l_fsd = ag::scale(l_fsd, inv);

  const auto gts = window_targets(windows.back(), cfg_.grid, cfg_.min_points);
  const StageTargets targets = stage_targets(fwd.target_proposals(), gts, cfg_.loss);
  const BoxHead::Output heads[] = {fwd.final_head};
  const StageLoss sm = stage_loss(heads, targets, cfg_.loss);
  StageLoss sc;
  if (!fwd.crossview.empty()) sc = stage_loss(fwd.crossview, targets, cfg_.loss);

  LossBundle b = total_loss(l_fsd, sm.total, fwd.crossview.empty() ? ag::Var() : sc.total);
  b.fsd_obj = obj * inv;
  b.fsd_reg = reg * inv;
  b.fsd_ori = ori * inv;
  b.mvaa_obj = sm.objectness.item();
  b.mvaa_reg = sm.regression.item();
  b.mvaa_ori = sm.orientation.item();
  if (!fwd.crossview.empty()) {
    b.cv_obj = sc.objectness.item();
    b.cv_reg = sc.regression.item();
    b.cv_ori = sc.orientation.item();
  }
  b.count_c = count_c;
  b.count_r = count_r;
  return b;
}

std::vector<Detection> Model::detections_from(const ForwardResult& fwd, double score_threshold) {
  std::vector<Detection> out;
  const ProposalSet& tp = fwd.target_proposals();
  const ag::Mat& logits = fwd.final_head.objectness.value();
  for (std::size_t p = 0; p < tp.size(); ++p) {
    if (!tp.valid[p]) continue;
    const double s = 1.0 / (1.0 + std::exp(-logits(static_cast<Eigen::Index>(p), 0)));
    if (s >= score_threshold) out.push_back({fwd.final_boxes[p], s});
  }
  return out;
}

std::vector<Detection> Model::detect(std::span<const Window> windows, double score_threshold) const {
  ag::NoGradGuard guard;
  return detections_from(forward(windows), score_threshold);
}

std::vector<GtObject> window_target_objects(const Window& w, const PillarGrid& grid, int min_points) {
  std::vector<GtObject> out;
  for (const auto& g : w.gts) {
    if (!(g.box.cx >= grid.x_min && g.box.cx < grid.x_max && g.box.cy >= grid.y_min && g.box.cy < grid.y_max)) continue;
    int n = 0;
    for (const auto& p : w.points) {
      if (g.box.contains(p, 0.1) && ++n >= min_points) break;
    }
    if (n >= min_points) out.push_back(g);
  }
  return out;
}

std::vector<Box7> window_targets(const Window& w, const PillarGrid& grid, int min_points) {
  std::vector<Box7> out;
  for (const auto& g : window_target_objects(w, grid, min_points)) out.push_back(g.box);
  return out;
}

}  // namespace m3d
