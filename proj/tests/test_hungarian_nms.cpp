#include "m3d/hungarian.hpp"
#include "m3d/maxpool_nms.hpp"

#include "support/oracles.hpp"

#include <gtest/gtest.h>

#include <random>
#include <set>

using namespace m3d;

namespace {

void expect_matching(const MatchResult& r, const Eigen::MatrixXd& m) {
  ASSERT_EQ(r.gt_to_pred.size(), static_cast<std::size_t>(m.rows()));
  ASSERT_EQ(r.pred_to_gt.size(), static_cast<std::size_t>(m.cols()));
  double total = 0;
  for (int g = 0; g < m.rows(); ++g) {
    const int p = r.gt_to_pred[g];
    if (p < 0) continue;
    ASSERT_EQ(r.pred_to_gt[p], g);
    total += m(g, p);
  }
  for (int p = 0; p < m.cols(); ++p)
    if (r.pred_to_gt[p] >= 0) ASSERT_EQ(r.gt_to_pred[r.pred_to_gt[p]], p);
  EXPECT_DOUBLE_EQ(total, r.total_utility);
}

}  // namespace

TEST(Hungarian, Examples) {
  Eigen::MatrixXd m(2, 2);
  m << 0.9, 0.1, 0.2, 0.8;
  auto r = hungarian_match(m);
  EXPECT_EQ(r.gt_to_pred, (std::vector<int>{0, 1}));
  EXPECT_NEAR(r.total_utility, 1.7, 1e-12);

  Eigen::MatrixXd one(1, 3);
  one << 0.2, 0.7, 0.5;
  r = hungarian_match(one);
  EXPECT_EQ(r.gt_to_pred[0], 1);
  EXPECT_EQ(r.pred_to_gt, (std::vector<int>{-1, 0, -1}));
}

TEST(Hungarian, TiesPreferLowerIndices) {
  const Eigen::MatrixXd zeros = Eigen::MatrixXd::Zero(2, 3);
  const auto r = hungarian_match(zeros);
  EXPECT_EQ(r.gt_to_pred, (std::vector<int>{0, 1}));
  Eigen::MatrixXd same = Eigen::MatrixXd::Constant(1, 4, 0.5);
  EXPECT_EQ(hungarian_match(same).gt_to_pred[0], 0);
}

TEST(Hungarian, MoreGtsThanPredictions) {
  Eigen::MatrixXd m(3, 1);
  m << 0.1, 0.6, 0.3;
  const auto r = hungarian_match(m);
  expect_matching(r, m);
  EXPECT_EQ(r.pred_to_gt[0], 1);
  EXPECT_EQ(r.gt_to_pred[0], -1);
  EXPECT_EQ(r.gt_to_pred[2], -1);
}

TEST(Hungarian, EmptyAndInvalid) {
  EXPECT_TRUE(hungarian_match(Eigen::MatrixXd(0, 4)).gt_to_pred.empty());
  EXPECT_EQ(hungarian_match(Eigen::MatrixXd(2, 0)).gt_to_pred, (std::vector<int>{-1, -1}));
  Eigen::MatrixXd bad = Eigen::MatrixXd::Zero(2, 2);
  bad(1, 1) = std::nan("");
  EXPECT_THROW(hungarian_match(bad), std::invalid_argument);
}

TEST(HungarianProps, OptimalVersusPermutations) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> dim(1, 7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 1000; ++t) {
    Eigen::MatrixXd m(dim(rng), dim(rng));
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = t % 3 == 0 ? std::round(u(rng) * 4) / 4 : u(rng);
    const auto r = hungarian_match(m);
    expect_matching(r, m);
    ASSERT_EQ(r.total_utility, oracle::assignment_brute_force(m)) << "trial " << t;
  }
}

// -- MaxPoolNMS ---------------------------------------------------------------------------------

TEST(MaxpoolNms, SingleMax) {
  std::vector<double> s(64 * 64, -std::numeric_limits<double>::infinity());
  s[1234] = 3.0;
  const auto p = maxpool_nms(s, 64, 64, 7, 4);
  ASSERT_EQ(p.size(), 4u);
  EXPECT_EQ(p.index[0], 1234);
  EXPECT_TRUE(p.is_peak[0]);
  for (int i = 1; i < 4; ++i) {
    EXPECT_EQ(p.index[i], -1);
    EXPECT_FALSE(p.valid(i));
    EXPECT_EQ(p.score[i], -std::numeric_limits<double>::infinity());
  }
}

TEST(MaxpoolNms, PlateauTieBreak) {
  const std::vector<double> s(10 * 10, 1.0);
  const auto mask = local_peak_mask(s, 10, 10, 3);
  EXPECT_EQ(mask, oracle::peaks_brute_force(s, 10, 10, 3));
  EXPECT_TRUE(mask[0]);
  EXPECT_FALSE(mask[1]);
}

TEST(MaxpoolNms, FillsWithBestNonPeaks) {
  std::vector<double> s = {5, 4, 3, 2, 1, 0, -1, -2, -3};
  const auto p = maxpool_nms(s, 3, 3, 3, 4);
  EXPECT_EQ(p.index, (std::vector<int>{0, 1, 2, 3}));
  EXPECT_EQ(p.is_peak, (std::vector<std::uint8_t>{1, 0, 0, 0}));
}

TEST(MaxpoolNms, Errors) {
  const std::vector<double> s(25, 0.0);
  EXPECT_THROW(maxpool_nms(s, 5, 5, 4, 1), std::invalid_argument);
  EXPECT_THROW(maxpool_nms(s, 5, 5, 7, 1), std::invalid_argument);
}

TEST(MaxpoolNmsProps, MatchesBruteForce) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> level(0, 3);
  for (int t = 0; t < 1000; ++t) {
    std::vector<double> s(64 * 64);
    // a third of the maps are quantized so plateaus and ties occur
    for (auto& v : s) v = t % 3 == 0 ? level(rng) : u(rng);
    const int k = t % 2 ? 7 : 3;
    const auto mask = local_peak_mask(s, 64, 64, k);
    ASSERT_EQ(mask, oracle::peaks_brute_force(s, 64, 64, k)) << "trial " << t;
    const auto p = maxpool_nms(s, 64, 64, k, 32);
    std::vector<int> expected;
    for (int i = 0; i < 64 * 64; ++i)
      if (mask[i]) expected.push_back(i);
    std::stable_sort(expected.begin(), expected.end(), [&](int a, int b) { return s[a] > s[b]; });
    for (std::size_t i = 0; i < std::min<std::size_t>(32, expected.size()); ++i) {
      ASSERT_EQ(p.index[i], expected[i]);
      ASSERT_TRUE(p.is_peak[i]);
    }
  }
}

TEST(MaxpoolNmsProps, PeaksAreSuppressedWithinWindow) {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> s(48 * 48);
    for (auto& v : s) v = u(rng);
    const auto p = maxpool_nms(s, 48, 48, 7, 64);
    for (std::size_t a = 0; a < p.size(); ++a)
      for (std::size_t b = a + 1; b < p.size(); ++b) {
        if (!p.is_peak[a] || !p.is_peak[b]) continue;
        const int dr = std::abs(p.index[a] / 48 - p.index[b] / 48), dc = std::abs(p.index[a] % 48 - p.index[b] % 48);
        ASSERT_FALSE(dr <= 3 && dc <= 3);
      }
  }
}

TEST(SequentialNms, KeepsBestAndSuppressesOverlaps) {
  const std::vector<Box7> boxes = {Box7(0, 0, 0, 4, 2, 1, 0), Box7(0.2, 0, 0, 4, 2, 1, 0), Box7(10, 0, 0, 4, 2, 1, 0)};
  const std::vector<double> scores = {0.5, 0.9, 0.7};
  EXPECT_EQ(sequential_nms(boxes, scores, 0.5, 10), (std::vector<int>{1, 2}));
  EXPECT_EQ(sequential_nms(boxes, scores, 0.5, 1), (std::vector<int>{1}));
}
