#pragma once

#include "m3d/autograd.hpp"
#include "m3d/fsd.hpp"
#include "m3d/mvaa.hpp"

#include <span>
#include <string>
#include <vector>

namespace m3d {

/// A loss value and whether its normalizing set was empty (then the value is a constant 0).
struct LossTerm {
  ag::Var value;
  bool empty = false;
  double item() const { return value.item(); }
};

/// Mean sigmoid cross-entropy over the site set C with 0/1 targets.
/// Throws std::invalid_argument for an empty C or a size mismatch.
ag::Var objectness_loss_binary(const ag::Var& logits, std::span<const std::uint8_t> positive);

/// Mean sigmoid cross-entropy against soft IoU targets in [0, 1].
ag::Var objectness_loss_iou_target(const ag::Var& logits, std::span<const double> targets);

/// Huber per component, summed over components, averaged over rows (the set R).
LossTerm smooth_l1_loss(const ag::Var& pred, const ag::Mat& target, double beta = 1.0);

/// Cross-entropy on the bin containing the target angle plus smooth-L1 on that bin's residual,
/// averaged over rows. `bin_logits` is ignored (may be undefined) when num_bins == 1.
LossTerm bin_orientation_loss(const ag::Var& bin_logits, const ag::Var& bin_residuals,
                              std::span<const double> target_angles, int num_bins, double beta = 1.0);

/// Bin index and residual target under the layout: num_bins equal bins over [-pi, pi).
int orientation_bin(double angle, int num_bins);
double orientation_bin_center(int bin, int num_bins);

struct LossOptions {
  double beta = 1.0;
  double min_iou = 0.05;  // IoU below this counts as unassigned for the second stage
  IouKind match_iou = IouKind::kVolume;
};

/// FSD term for one frame: binary objectness over C plus regression and 12-bin orientation over
/// the positive sites (matched and reassigned).
struct FsdLoss {
  ag::Var total, objectness, regression, orientation;
  int num_sites = 0, num_positive = 0;
};
FsdLoss fsd_loss(const ag::Var& head, const BevFeatureMap& fmap, const FsdBoxCoder& coder,
                 const FsdAssignment& assignment, std::span<const Box7> gts, const LossOptions& opt = {});

/// IoU targets and residual targets for second-stage predictions over `proposals`.
struct StageTargets {
  std::vector<double> iou;         // per proposal (0 for sentinels and unassigned)
  std::vector<int> rows;           // proposals in R
  ag::Mat residuals;               // |R| x 7 targets
  std::vector<int> valid_rows;     // proposals scored by objectness (non-sentinel)
};
StageTargets stage_targets(const ProposalSet& proposals, std::span<const Box7> gts, const LossOptions& opt = {});

/// IoU-target objectness + smooth-L1 (6 components) + 1-bin orientation. `heads` may hold several
/// prediction sets (the cross-view views); instances are pooled before averaging.
struct StageLoss {
  ag::Var total, objectness, regression, orientation;
  int num_scored = 0, num_regressed = 0;
};
StageLoss stage_loss(std::span<const BoxHead::Output> heads, const StageTargets& targets, const LossOptions& opt = {});

struct LossBundle {
  ag::Var fsd, mvaa, cv, total;
  // Diagnostics (values only).
  double fsd_obj = 0, fsd_reg = 0, fsd_ori = 0;
  double mvaa_obj = 0, mvaa_reg = 0, mvaa_ori = 0;
  double cv_obj = 0, cv_reg = 0, cv_ori = 0;
  int count_c = 0, count_r = 0;
  bool has_mvaa = false, has_cv = false;

  double l_fsd() const { return fsd.item(); }
  double l_mvaa() const { return mvaa.item(); }
  double l_cv() const { return cv.item(); }
  double l_total() const { return total.item(); }
  bool finite() const;
  std::string describe() const;
};

/// L_total = L_fsd + L_mvaa + L_cv; absent terms enter as constant zeros.
LossBundle total_loss(const ag::Var& l_fsd, const ag::Var& l_mvaa, const ag::Var& l_cv);

}  // namespace m3d
