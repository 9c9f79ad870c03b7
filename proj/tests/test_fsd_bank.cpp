#include "m3d/fsd.hpp"
#include "m3d/memory_bank.hpp"

#include "support/oracles.hpp"

#include <gtest/gtest.h>

#include <functional>
#include <random>
#include <set>

using namespace m3d;
using ag::Mat;

namespace {

PillarGrid small_grid(int n = 16, double half = 4.8) {
  PillarGrid g;
  g.nx = g.ny = n;
  g.x_min = g.y_min = -half;
  g.x_max = g.y_max = half;
  return g;
}

void randomize(nn::ParameterStore& ps, unsigned seed, double scale = 0.3) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-scale, scale);
  for (auto& e : ps.entries())
    for (Eigen::Index i = 0; i < e.var.value().size(); ++i) e.var.mutable_value().data()[i] = u(rng);
}

BevFeatureMap field_map(const PillarGrid& g, int channels, const std::function<double(double, double, int)>& f) {
  BevFeatureMap m;
  m.grid = g;
  m.height = g.nx;
  m.width = g.ny;
  Mat v(g.cells(), channels);
  for (int r = 0; r < g.nx; ++r)
    for (int c = 0; c < g.ny; ++c) {
      const auto xy = g.cell_center(r, c);
      for (int k = 0; k < channels; ++k) v(r * g.ny + c, k) = f(xy.x(), xy.y(), k);
    }
  m.features = ag::Var::constant(std::move(v));
  return m;
}

}  // namespace

// -- backbone -----------------------------------------------------------------------------------

TEST(Backbone, ZeroInputGivesUniformInteriorResponse) {
  const PillarGrid g = small_grid();
  BackboneConfig cfg;
  cfg.block_channels = {6};
  cfg.block_layers = {2};
  cfg.block_strides = {1};
  cfg.up_channels = {5};
  nn::ParameterStore ps(1);
  Backbone bb(ps, 4, cfg);
  randomize(ps, 2);
  const auto out = bb.forward(ag::Var::constant(Mat::Zero(g.cells(), 4)), g);
  ASSERT_EQ(out.height, 16);
  ASSERT_EQ(out.channels(), 5);
  const Mat& f = out.features.value();
  // two 3x3 convs with zero padding reach two cells in from the border
  const Eigen::RowVectorXd ref = f.row(2 * 16 + 2);
  for (int r = 2; r < 14; ++r)
    for (int c = 2; c < 14; ++c) ASSERT_LT((f.row(r * 16 + c) - ref).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Backbone, StridedResponseIsPeriodicInTheInterior) {
  const PillarGrid g = small_grid(32);
  BackboneConfig cfg;
  cfg.block_channels = {4, 6, 8};
  cfg.block_layers = {1, 1, 1};
  cfg.up_channels = {3, 3, 3};
  nn::ParameterStore ps(3);
  Backbone bb(ps, 4, cfg);
  randomize(ps, 4);
  const auto out = bb.forward(ag::Var::constant(Mat::Zero(g.cells(), 4)), g);
  ASSERT_EQ(out.channels(), 9);
  const Mat& f = out.features.value();
  // upsampling by the total stride of 4 makes the zero-input response 4-periodic
  for (int r = 8; r < 20; ++r)
    for (int c = 8; c < 20; ++c) ASSERT_LT((f.row(r * 32 + c) - f.row((r + 4) * 32 + c + 4)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Backbone, RejectsMismatchedInputs) {
  const PillarGrid g = small_grid();
  nn::ParameterStore ps(5);
  BackboneConfig cfg;
  Backbone bb(ps, 4, cfg);
  EXPECT_THROW(bb.forward(ag::Var::constant(Mat::Zero(g.cells(), 3)), g), std::invalid_argument);
  EXPECT_THROW(bb.forward(ag::Var::constant(Mat::Zero(g.cells() - 1, 4)), g), std::invalid_argument);
  const PillarGrid odd = small_grid(18);
  EXPECT_THROW(bb.forward(ag::Var::constant(Mat::Zero(odd.cells(), 4)), odd), std::invalid_argument);
  cfg.up_channels = {1};
  EXPECT_THROW(Backbone(ps, 4, cfg), std::invalid_argument);
}

TEST(Backbone, HeadPassesFiniteDifferencesOnSmallMap) {
  const PillarGrid g = small_grid(8, 2.4);
  BackboneConfig cfg;
  cfg.block_channels = {3, 4};
  cfg.block_layers = {1, 1};
  cfg.block_strides = {1, 2};
  cfg.up_channels = {2, 2};
  nn::ParameterStore ps(6);
  Backbone bb(ps, 3, cfg);
  FsdBoxCoder coder;
  DenseHead head(ps, cfg.out_channels(), coder);
  randomize(ps, 7, 0.5);
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-1, 1);
  Mat x(g.cells(), 3), w(g.cells(), coder.channels());
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = u(rng);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = u(rng);
  ag::Var in = ag::Var::parameter(x);
  std::vector<ag::Var> vars = {in};
  for (auto& e : ps.entries()) vars.push_back(e.var);
  const auto r = oracle::check_gradients(
      [&] { return ag::sum(ag::mul(head.forward(bb.forward(in, g)), ag::Var::constant(w))); }, vars);
  EXPECT_LT(r.max_rel_error, 1e-4) << r.worst;
}

// -- coder ------------------------------------------------------------------------------------

TEST(FsdBoxCoder, Layout) {
  FsdBoxCoder c;
  EXPECT_EQ(c.channels(), 31);
  EXPECT_EQ(c.bin_of(0.0), 6);
  EXPECT_EQ(c.bin_of(-kPi), 0);
  EXPECT_EQ(c.bin_of(kPi - 1e-9), 11);
  EXPECT_NEAR(c.bin_center(6), kPi / 12, 1e-12);
}

TEST(FsdBoxCoder, EncodeDecodeRoundtrip) {
  FsdBoxCoder c;
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> loc(-1, 1);
  for (int t = 0; t < 2000; ++t) {
    const Box7 gt = oracle::random_box(rng, 10);
    const Eigen::Vector2d center(gt.cx + loc(rng), gt.cy + loc(rng));
    const auto tg = c.encode(gt, center);
    ASSERT_LE(std::abs(tg.bin_residual), 0.5 * c.bin_width() + 1e-12);
    std::vector<double> row(c.channels(), 0.0);
    row[FsdBoxCoder::kObj] = 1.0;
    for (int i = 0; i < 6; ++i) row[FsdBoxCoder::kOffset + i] = tg.reg[i];
    row[FsdBoxCoder::kBins + tg.bin] = 5.0;
    row[FsdBoxCoder::kBins + c.num_bins + tg.bin] = tg.bin_residual;
    const Box7 back = c.decode(row, center);
    ASSERT_NEAR(back.cx, gt.cx, 1e-9);
    ASSERT_NEAR(back.cy, gt.cy, 1e-9);
    ASSERT_NEAR(back.cz, gt.cz, 1e-9);
    ASSERT_NEAR(back.length, gt.length, 1e-9);
    ASSERT_NEAR(back.width, gt.width, 1e-9);
    ASSERT_NEAR(back.height, gt.height, 1e-9);
    ASSERT_NEAR(wrap_angle(back.heading - gt.heading), 0.0, 1e-9);
  }
}

TEST(SelectProposals, PeaksDecodeAtTheirCells) {
  const PillarGrid g = small_grid();
  FsdBoxCoder coder;
  BevFeatureMap fmap;
  fmap.grid = g;
  fmap.height = fmap.width = 16;
  Mat head = Mat::Zero(g.cells(), coder.channels());
  std::mt19937_64 rng(15);
  std::uniform_real_distribution<double> low(-6, -4);
  for (int i = 0; i < g.cells(); ++i) head(i, FsdBoxCoder::kObj) = low(rng);
  head(3 * 16 + 4, FsdBoxCoder::kObj) = 2.0;
  head(12 * 16 + 9, FsdBoxCoder::kObj) = 1.0;
  const auto ps = select_proposals(head, fmap, coder, 3, 4);
  ASSERT_EQ(ps.size(), 4u);
  EXPECT_EQ(ps.locations[0], 3 * 16 + 4);
  EXPECT_EQ(ps.locations[1], 12 * 16 + 9);
  EXPECT_TRUE(ps.is_peak[0] && ps.is_peak[1]);
  EXPECT_EQ(ps.valid_count(), 4u);
  const auto c = g.cell_center(3, 4);
  EXPECT_NEAR(ps.boxes[0].cx, c.x(), 1e-12);
  EXPECT_NEAR(ps.boxes[0].cy, c.y(), 1e-12);
  EXPECT_NEAR(ps.boxes[0].length, coder.prior_length, 1e-12);

  const auto many = select_proposals(head, fmap, coder, 3, g.cells() + 5);
  EXPECT_EQ(many.valid_count(), static_cast<std::size_t>(g.cells()));
  EXPECT_FALSE(many.valid.back());
  EXPECT_EQ(many.locations.back(), -1);
}

// -- assignment ---------------------------------------------------------------------------------

namespace {

struct AssignFixture {
  PillarGrid g = small_grid();
  BevFeatureMap fmap;
  ProposalSet ps;
  AssignFixture() {
    fmap.grid = g;
    fmap.height = fmap.width = 16;
  }
  void add(const Box7& b, int loc, bool valid = true) {
    ps.boxes.push_back(b);
    ps.scores.push_back(valid ? 0.0 : -std::numeric_limits<double>::infinity());
    ps.valid.push_back(valid);
    ps.is_peak.push_back(valid);
    ps.locations.push_back(valid ? loc : -1);
  }
};

}  // namespace

TEST(FsdAssign, MatchedAndReassigned) {
  AssignFixture f;
  f.add(Box7(1.0, 1.0, 0.8, 4, 2, 1.6, 0), 5);
  f.add(Box7(-3, -3, 0.8, 4, 2, 1.6, 0), 7);
  f.add(Box7(), 0, false);
  const std::vector<Box7> gts = {Box7(1.1, 1.0, 0.8, 4, 2, 1.6, 0.1), Box7(3.5, -4.0, 0.8, 1, 1, 1.6, 0)};
  const auto a = fsd_assign(f.ps, gts, f.fmap);
  EXPECT_EQ(a.gt_site[0], 5);
  EXPECT_FALSE(a.gt_reassigned[0]);
  EXPECT_TRUE(a.gt_reassigned[1]);
  // nearest cell to (3.5, -4.0) with 0.6 m cells
  EXPECT_EQ(a.gt_site[1], 13 * 16 + 1);
  EXPECT_EQ(a.num_positive(), 2);
  EXPECT_EQ(a.sites, (std::vector<int>{5, 7, 13 * 16 + 1}));
  EXPECT_EQ(a.site_gt, (std::vector<int>{0, -1, 1}));
}

TEST(FsdAssign, CenterednessTakesNearestCells) {
  AssignFixture f;
  f.add(Box7(1.0, 1.0, 0.8, 4, 2, 1.6, 0), 5);
  const std::vector<Box7> gts = {Box7(1.1, 1.0, 0.8, 4, 2, 1.6, 0.1)};
  const auto a = fsd_assign(f.ps, gts, f.fmap, IouKind::kVolume, AssignStrategy::kCenteredness);
  EXPECT_EQ(a.gt_site[0], 9 * 16 + 9);
  EXPECT_EQ(a.sites.size(), 2u);
}

TEST(FsdAssignProps, SitesArePartitionedConsistently) {
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> u(-4.5, 4.5);
  for (int t = 0; t < 200; ++t) {
    AssignFixture f;
    for (int p = 0; p < 8; ++p) f.add(Box7(u(rng), u(rng), 0.8, 3, 1.5, 1.6, u(rng)), 17 * p + t % 17, p < 6);
    std::vector<Box7> gts;
    for (int k = 0; k < 5; ++k) gts.emplace_back(u(rng), u(rng), 0.8, 3, 1.5, 1.6, u(rng));
    const auto a = fsd_assign(f.ps, gts, f.fmap);
    std::set<int> uniq(a.gt_site.begin(), a.gt_site.end());
    ASSERT_EQ(uniq.size(), gts.size());
    std::set<int> site_set(a.sites.begin(), a.sites.end());
    ASSERT_EQ(site_set.size(), a.sites.size());
    ASSERT_EQ(a.num_positive(), 5);
    for (std::size_t s = 0; s < a.sites.size(); ++s)
      if (a.positive[s]) ASSERT_EQ(a.gt_site[a.site_gt[s]], a.sites[s]);
    for (std::size_t g = 0; g < gts.size(); ++g) {
      const int p = a.match.gt_to_pred[g];
      const bool overlapping = p >= 0 && iou_3d(gts[g], f.ps.boxes[p]) > 0 && f.ps.valid[p];
      ASSERT_EQ(static_cast<bool>(a.gt_reassigned[g]), !overlapping);
    }
  }
}

// -- memory bank --------------------------------------------------------------------------------

namespace {

ProposalSet proposals_of(std::vector<Box7> boxes) {
  ProposalSet ps;
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    ps.scores.push_back(0);
    ps.valid.push_back(1);
    ps.is_peak.push_back(1);
    ps.locations.push_back(static_cast<int>(i));
  }
  ps.boxes = std::move(boxes);
  return ps;
}

BevFeatureMap blank_map(int channels = 2) {
  BevFeatureMap m;
  m.grid = small_grid(4, 1.2);
  m.height = m.width = 4;
  m.features = ag::Var::constant(Mat::Zero(16, channels));
  return m;
}

}  // namespace

TEST(MemoryBank, FifoEviction) {
  MemoryBank bank(3);
  for (int t = 0; t < 5; ++t) bank.push(proposals_of({Box7()}), blank_map(), Pose(), t);
  EXPECT_EQ(bank.size(), 3u);
  EXPECT_EQ(bank.frame_indices(), (std::vector<int>{2, 3, 4}));
  MemoryBank none(0);
  none.push(proposals_of({Box7()}), blank_map(), Pose(), 0);
  EXPECT_TRUE(none.empty());
  EXPECT_THROW(MemoryBank(-1), std::invalid_argument);
}

TEST(MemoryBank, RejectsInconsistentEntries) {
  MemoryBank bank(4);
  bank.push(proposals_of({Box7(), Box7()}), blank_map(), Pose(), 3);
  EXPECT_THROW(bank.push(proposals_of({Box7()}), blank_map(), Pose(), 4), std::invalid_argument);
  EXPECT_THROW(bank.push(proposals_of({Box7(), Box7()}), blank_map(3), Pose(), 4), std::invalid_argument);
  EXPECT_THROW(bank.push(proposals_of({Box7(), Box7()}), blank_map(), Pose(), 3), std::invalid_argument);
  EXPECT_EQ(bank.size(), 1u);
}

TEST(MemoryBank, UnionIsExpressedInEachStoredFrame) {
  MemoryBank bank(2);
  const Pose p0 = Pose::from_xyz_yaw(0, 0, 0, 0), p1 = Pose::from_xyz_yaw(2, 1, 0, 0.3);
  const Pose pt = Pose::from_xyz_yaw(4, 1, 0, 0.5);
  bank.push(proposals_of({Box7(5, 0, 0.8, 4, 2, 1.6, 0), Box7(1, 1, 0.8, 4, 2, 1.6, 1)}), blank_map(), p0, 0);
  auto stored = proposals_of({Box7(3, 0, 0.8, 4, 2, 1.6, 0), Box7(-2, 1, 0.8, 4, 2, 1.6, 1)});
  stored.valid[1] = 0;
  bank.push(stored, blank_map(), p1, 1);
  const auto target = proposals_of({Box7(1, 0, 0.8, 4, 2, 1.6, 0.2), Box7(0, 3, 0.8, 4, 2, 1.6, -1)});
  const auto u = union_proposals(bank, target, pt);
  ASSERT_EQ(u.size(), 2u);
  for (std::size_t s = 0; s < 2; ++s) {
    ASSERT_EQ(u[s].boxes.size(), 6u);
    EXPECT_EQ(u[s].valid, (std::vector<std::uint8_t>{1, 1, 1, 1, 1, 0}));
    const Pose& dst = bank[s].pose;
    const auto t = transform_boxes(target.boxes, pt, dst);
    EXPECT_NEAR(iou_bev(u[s].boxes[0], t[0]), 1.0, 1e-9);
    // the stored entry's own boxes stay put in its own frame
    const auto& own = bank[s].proposals.boxes;
    EXPECT_NEAR(u[s].boxes[2 + 2 * s].cx, own[0].cx, 1e-9);
    EXPECT_NEAR(u[s].boxes[2 + 2 * s].cy, own[0].cy, 1e-9);
  }
  // world-space positions agree across frames
  const Eigen::Vector3d a = bank[0].pose.apply({u[0].boxes[1].cx, u[0].boxes[1].cy, u[0].boxes[1].cz});
  const Eigen::Vector3d b = bank[1].pose.apply({u[1].boxes[1].cx, u[1].boxes[1].cy, u[1].boxes[1].cz});
  EXPECT_LT((a - b).norm(), 1e-9);
  EXPECT_THROW(union_proposals(MemoryBank(2), target, pt), std::invalid_argument);
}

// -- bilinear sampling and ROI features ----------------------------------------------------------

TEST(BilinearProps, ExactOnAffineFields) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> coef(-3, 3), pos(0, 11);
  for (int t = 0; t < 200; ++t) {
    const double a = coef(rng), b = coef(rng), c = coef(rng);
    Mat m(12 * 12, 1);
    for (int r = 0; r < 12; ++r)
      for (int q = 0; q < 12; ++q) m(r * 12 + q, 0) = a + b * r + c * q;
    const double u = pos(rng), v = pos(rng);
    ASSERT_NEAR(bilinear_sample(m, 12, 12, u, v)(0), a + b * u + c * v, 1e-9);
  }
}

TEST(Bilinear, ZeroPaddingOutside) {
  const Mat m = Mat::Ones(4 * 4, 1);
  EXPECT_NEAR(bilinear_sample(m, 4, 4, -0.5, 1.0)(0), 0.5, 1e-12);
  EXPECT_EQ(bilinear_sample(m, 4, 4, -2.0, 1.0)(0), 0.0);
  EXPECT_NEAR(bilinear_sample(m, 4, 4, 3.0, 3.0)(0), 1.0, 1e-12);
}

TEST(RoiFeatures, RampFieldGivesBoxCenter) {
  const PillarGrid g = small_grid(32, 9.6);
  const auto fmap = field_map(g, 2, [](double x, double y, int k) { return k == 0 ? x : y; });
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(-4, 4), ang(-kPi, kPi);
  std::vector<Box7> boxes;
  for (int i = 0; i < 50; ++i) boxes.emplace_back(u(rng), u(rng), 0, 4.5, 2, 1.6, ang(rng));
  for (int k : {1, 3, 7}) {
    const Mat f = extract_roi_features(fmap, boxes, k).value();
    for (std::size_t i = 0; i < boxes.size(); ++i) {
      ASSERT_NEAR(f(i, 0), boxes[i].cx, 1e-9);
      ASSERT_NEAR(f(i, 1), boxes[i].cy, 1e-9);
    }
  }
}

TEST(RoiFeatures, MatchesIndependentKeyPointOracle) {
  const PillarGrid g = small_grid(24, 7.2);
  const auto fmap = field_map(g, 3, [](double x, double y, int k) { return std::sin(0.7 * x + k) * std::cos(0.4 * y - k); });
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(-5, 5), ang(-kPi, kPi);
  const double cell = g.pillar_dx();
  for (int t = 0; t < 40; ++t) {
    const Box7 b(u(rng), u(rng), 0, 4, 2, 1.5, ang(rng));
    const int k = 5;
    Eigen::RowVectorXd expect = Eigen::RowVectorXd::Zero(3);
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < k; ++j) {
        const Eigen::Vector3d w = b.to_world({((i + 0.5) / k - 0.5) * b.length, ((j + 0.5) / k - 0.5) * b.width, 0});
        expect += bilinear_sample(fmap.features.value(), 24, 24, (w.x() - g.x_min) / cell - 0.5, (w.y() - g.y_min) / cell - 0.5);
      }
    expect /= k * k;
    const std::vector<Box7> one = {b};
    ASSERT_LT((extract_roi_features(fmap, one, k).value().row(0) - expect).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(RoiFeatures, ConvergesToFootprintAverage) {
  const PillarGrid g = small_grid(48, 9.6);
  const auto fmap = field_map(g, 1, [](double x, double y, int) { return std::sin(0.5 * x) + 0.3 * std::cos(0.8 * y); });
  const std::vector<Box7> boxes = {Box7(1.3, -0.7, 0, 4.6, 2.1, 1.6, 0.6), Box7(-3, 2, 0, 3.9, 1.9, 1.6, -2.2)};
  // supersample each box far past the K used by the model
  const Mat coarse = extract_roi_features(fmap, boxes, 32).value();
  const Mat fine = extract_roi_features(fmap, boxes, 256).value();
  EXPECT_LT((coarse - fine).cwiseAbs().maxCoeff(), 1e-3);
}

TEST(RoiFeaturesProps, QuarterTurnInvariance) {
  const PillarGrid g = small_grid(32, 9.6);
  const auto fmap = field_map(g, 2, [](double x, double y, int k) { return std::sin(0.6 * x + k) + x * y * 0.05; });
  std::mt19937_64 rng(14);
  std::uniform_real_distribution<double> u(-5, 5), ang(-kPi, kPi);
  for (int t = 0; t < 100; ++t) {
    const Box7 b(u(rng), u(rng), 0, 4.4, 1.9, 1.6, ang(rng));
    const std::vector<Box7> pair = {b, Box7(b.cx, b.cy, b.cz, b.width, b.length, b.height, b.heading + kPi / 2)};
    for (int k : {3, 7}) {
      const Mat f = extract_roi_features(fmap, pair, k).value();
      ASSERT_LT((f.row(0) - f.row(1)).cwiseAbs().maxCoeff(), 1e-6);
    }
  }
  // rotating the map and the box together by 90 degrees about the grid center
  const auto rotated = field_map(g, 2, [](double x, double y, int k) { return std::sin(0.6 * y + k) - x * y * 0.05; });
  for (int t = 0; t < 100; ++t) {
    const Box7 b(u(rng), u(rng), 0, 4.4, 1.9, 1.6, ang(rng));
    const std::vector<Box7> one = {b};
    const std::vector<Box7> turned = {Box7(-b.cy, b.cx, b.cz, b.length, b.width, b.height, b.heading + kPi / 2)};
    const Mat a = extract_roi_features(fmap, one, 7).value(), c = extract_roi_features(rotated, turned, 7).value();
    ASSERT_LT((a - c).cwiseAbs().maxCoeff(), 1e-6);
  }
}

TEST(RoiFeatures, MaskAndGradients) {
  const PillarGrid g = small_grid(8, 2.4);
  BevFeatureMap fmap = field_map(g, 2, [](double x, double y, int k) { return x - y + k; });
  const std::vector<Box7> boxes = {Box7(0.2, 0.1, 0, 1.5, 1, 1, 0.4), Box7(-0.5, 0.3, 0, 1, 0.8, 1, -1)};
  const std::vector<std::uint8_t> mask = {1, 0};
  const Mat f = extract_roi_features(fmap, boxes, 3, mask).value();
  EXPECT_EQ(f.row(1).cwiseAbs().sum(), 0.0);
  EXPECT_NE(f.row(0).cwiseAbs().sum(), 0.0);
  const std::vector<std::uint8_t> bad = {1};
  EXPECT_THROW(extract_roi_features(fmap, boxes, 3, bad), std::invalid_argument);
  EXPECT_THROW(extract_roi_features(fmap, boxes, 0), std::invalid_argument);

  fmap.features = ag::Var::parameter(fmap.features.value());
  const ag::Var w = ag::Var::constant(Mat::Random(2, 2));
  const auto r = oracle::check_gradients(
      [&] { return ag::sum(ag::mul(extract_roi_features(fmap, boxes, 3), w)); },
      {fmap.features});
  EXPECT_LT(r.max_rel_error, 1e-4) << r.worst;
}
