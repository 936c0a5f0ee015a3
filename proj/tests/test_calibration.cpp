#include <algorithm>
#include <numeric>
#include <random>

#include <boost/rational.hpp>
#include <gtest/gtest.h>

#include "suq/calibration.hpp"
#include "suq/synth.hpp"

namespace suq {
namespace {

ReliabilityBins bins_of(const std::vector<double>& c, const std::vector<int>& y, std::size_t n = 10) {
  ReliabilityBins b(n);
  for (std::size_t i = 0; i < c.size(); ++i) b.add(c[i], y[i] != 0);
  return b;
}

TEST(Bins, FourVoxelHandCase) {
  const auto b = bins_of({0.95, 0.85, 0.15, 0.05}, {1, 0, 1, 0});
  EXPECT_EQ(b.occupied(), 4u);
  EXPECT_EQ(b.total(), 4u);
  for (std::size_t i : {0u, 1u, 8u, 9u}) EXPECT_EQ(b[i].count, 1u) << i;
  EXPECT_EQ(b[9].positives, 1u);
  EXPECT_EQ(b[8].positives, 0u);
}

TEST(Ece, FourVoxelHandCaseIsExactly045) {
  // Exact rational oracle: per-bin |confidence - accuracy| in hundredths.
  using R = boost::rational<long long>;
  const R gap = (R(5, 100) + R(85, 100) + R(85, 100) + R(5, 100)) / R(4);
  ASSERT_EQ(gap, R(9, 20));
  const double oracle = boost::rational_cast<double>(gap);
  const double e = ece(bins_of({0.95, 0.85, 0.15, 0.05}, {1, 0, 1, 0}));
  EXPECT_EQ(e, oracle);
  EXPECT_EQ(e, 0.45);
}

TEST(Bins, ConfidenceOneGoesToLastBin) {
  const auto b = bins_of({1.0, 1.0, 1.0}, {1, 1, 1});
  EXPECT_EQ(b.occupied(), 1u);
  EXPECT_EQ(b[9].count, 3u);
  EXPECT_EQ(b[9].accuracy(), 1.0);
  EXPECT_EQ(ece(b), 0.0);
}

TEST(Bins, EdgesAssignToUpperBin) {
  for (std::size_t n : {3u, 7u, 10u, 13u}) {
    ReliabilityBins b(n);
    for (std::size_t k = 0; k < n; ++k) {
      EXPECT_EQ(b.index_of(b.lower_edge(k)), k) << n << "/" << k;
      EXPECT_EQ(b.index_of(std::nextafter(b.lower_edge(k), -1.0)), k == 0 ? 0 : k - 1);
    }
  }
}

TEST(Bins, RejectsOutOfRangeAndMismatch) {
  ReliabilityBins b(10);
  EXPECT_THROW(b.add(1.01, true), Error);
  EXPECT_THROW(b.add(-0.01, true), Error);
  EXPECT_THROW(b.add(std::nan(""), true), Error);
  ReliabilityBins c(5);
  EXPECT_THROW(b += c, Error);
  EXPECT_THROW(ece(b), Error);
  EXPECT_THROW(ReliabilityBins(0), Error);
}

TEST(Ece, PerfectConfidentCorrectIsZero) {
  EXPECT_EQ(ece(bins_of({0.0, 1.0, 0.0, 1.0}, {0, 1, 0, 1})), 0.0);
}

std::pair<std::vector<double>, std::vector<int>> random_voxels(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> c(n);
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    c[i] = u(rng);
    y[i] = u(rng) < c[i] * c[i] ? 1 : 0;
  }
  return {c, y};
}

TEST(Ece, BoundsAndPermutationInvariance) {
  std::mt19937_64 rng(1);
  for (int iter = 0; iter < 50; ++iter) {
    auto [c, y] = random_voxels(rng, 500);
    const auto b = bins_of(c, y);
    const double e = ece(b);
    const double g = signed_gap(b);
    EXPECT_GE(e, 0.0);
    EXPECT_LE(e, 1.0);
    EXPECT_GE(e + 1e-15, std::abs(g));
    std::vector<std::size_t> idx(c.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    std::vector<double> c2;
    std::vector<int> y2;
    for (auto i : idx) {
      c2.push_back(c[i]);
      y2.push_back(y[i]);
    }
    const auto b2 = bins_of(c2, y2);
    EXPECT_TRUE(b2 == b);
    EXPECT_EQ(ece(b2), e);
    EXPECT_EQ(signed_gap(b2), g);
  }
}

TEST(Merge, EqualsConcatenationExactlyForAnyPartition) {
  std::mt19937_64 rng(2);
  auto [c, y] = random_voxels(rng, 3000);
  const auto whole = bins_of(c, y);
  for (int iter = 0; iter < 20; ++iter) {
    std::vector<std::size_t> cuts = {0, c.size()};
    for (int k = 0; k < 4; ++k) cuts.push_back(rng() % c.size());
    std::sort(cuts.begin(), cuts.end());
    std::vector<ReliabilityBins> parts;
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
      std::vector<double> pc(c.begin() + cuts[k], c.begin() + cuts[k + 1]);
      std::vector<int> py(y.begin() + cuts[k], y.begin() + cuts[k + 1]);
      parts.push_back(bins_of(pc, py));
    }
    std::shuffle(parts.begin(), parts.end(), rng);
    const auto merged = merge_bins(parts);
    EXPECT_TRUE(merged == whole);
    EXPECT_EQ(ece(merged), ece(whole));
  }
}

TEST(Merge, IdentityAndCommutativity) {
  std::mt19937_64 rng(3);
  auto [c1, y1] = random_voxels(rng, 200);
  auto [c2, y2] = random_voxels(rng, 300);
  const auto a = bins_of(c1, y1);
  const auto b = bins_of(c2, y2);
  EXPECT_TRUE(merge_bins(a, ReliabilityBins(10)) == a);
  EXPECT_TRUE(merge_bins(a, b) == merge_bins(b, a));
  EXPECT_THROW(merge_bins(a, ReliabilityBins(4)), Error);
}

TEST(Classify, SignedGapRule) {
  CalibrationReport r;
  r.signed_gap = 0.0;
  EXPECT_EQ(classify_subject_calibration(r, 1e-9), CalibrationClass::well_calibrated);
  r.signed_gap = -0.05;
  EXPECT_EQ(classify_subject_calibration(r, 0.02), CalibrationClass::underconfident);
  r.signed_gap = 0.05;
  EXPECT_EQ(classify_subject_calibration(r, 0.02), CalibrationClass::overconfident);
  r.signed_gap = 0.02;
  EXPECT_EQ(classify_subject_calibration(r, 0.02), CalibrationClass::well_calibrated);
}

TEST(Diagram, RowsForOccupiedBinsOnly) {
  const auto b = bins_of({0.95, 0.85, 0.86, 0.05}, {1, 0, 1, 0});
  const auto rows = reliability_diagram(b);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].bin_lower, 0.0);
  EXPECT_EQ(rows[1].count, 2u);
  EXPECT_DOUBLE_EQ(rows[1].mean_confidence, 0.855);
  EXPECT_EQ(rows[1].accuracy, 0.5);
  EXPECT_EQ(rows[2].bin_upper, 1.0);
}

TEST(Masking, PairMiscalibratedAloneCalibratedTogether) {
  SynthConfig base;
  base.dims = {60, 60, 60};
  base.seed = 99;
  const auto [a, b] = generate_masking_pair(0.2, base);
  const auto ba = bin_predictions(a.prob, a.ground_truth);
  const auto bb = bin_predictions(b.prob, b.ground_truth);
  EXPECT_GE(ece(ba), 0.15);
  EXPECT_GE(ece(bb), 0.15);
  EXPECT_LE(ece(merge_bins(ba, bb)), 0.02);
  EXPECT_GT(signed_gap(ba), 0.0);
  EXPECT_LT(signed_gap(bb), 0.0);
}

TEST(Masking, MaskRestrictsBinnedVoxels) {
  ProbMap c{{4}, VoxelArray<double>(4)};
  c.values << 0.1, 0.2, 0.9, 0.95;
  LabelMap y{{4}, LabelArray(4)};
  y.values << 0, 0, 1, 1;
  LabelMap m{{4}, LabelArray(4)};
  m.values << 0, 1, 1, 0;
  const auto b = bin_predictions(c, y, 10, &m);
  EXPECT_EQ(b.total(), 2u);
  EXPECT_EQ(b[2].count, 1u);
  EXPECT_EQ(b[9].count, 1u);
}

}  // namespace
}  // namespace suq
