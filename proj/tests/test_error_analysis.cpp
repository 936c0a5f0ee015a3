#include <random>
#include <set>

#include <boost/rational.hpp>
#include <gtest/gtest.h>

#include "suq/error_analysis.hpp"

namespace suq {
namespace {

using Rational = boost::rational<long long>;

// Dice as an exact fraction; nullopt when undefined (both masks empty).
std::optional<Rational> dice_oracle(long long tp, long long fp, long long fn) {
  if (tp + fp + fn == 0) return std::nullopt;
  return Rational(2 * tp, 2 * tp + fp + fn);
}

struct Instance {
  LabelMap pred, gt;
  UncertaintyMap q;
};

// Voxels laid out region by region; the first *u voxels of each region get q = 1.
Instance from_counts(std::size_t tp, std::size_t tn, std::size_t fp, std::size_t fn, std::size_t tpu,
                     std::size_t tnu, std::size_t fpu, std::size_t fnu) {
  const std::size_t n = tp + tn + fp + fn;
  Instance in;
  in.pred = {{n}, LabelArray(n)};
  in.gt = {{n}, LabelArray(n)};
  in.q = {{n}, VoxelArray<double>::Zero(n)};
  std::size_t i = 0;
  auto region = [&](std::size_t count, std::size_t uncertain, std::uint8_t p, std::uint8_t g) {
    for (std::size_t k = 0; k < count; ++k, ++i) {
      in.pred.values(i) = p;
      in.gt.values(i) = g;
      in.q.values(i) = k < uncertain ? 1.0 : 0.0;
    }
  };
  region(tp, tpu, 1, 1);
  region(tn, tnu, 0, 0);
  region(fp, fpu, 1, 0);
  region(fn, fnu, 0, 1);
  return in;
}

struct Random {
  std::mt19937_64 rng;
  explicit Random(std::uint64_t seed) : rng(seed) {}
  Instance instance(std::size_t n, double err_rate) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Instance in;
    in.pred = {{n}, LabelArray(n)};
    in.gt = {{n}, LabelArray(n)};
    in.q = {{n}, VoxelArray<double>(n)};
    for (std::size_t i = 0; i < n; ++i) {
      in.gt.values(i) = u(rng) < 0.4 ? 1 : 0;
      const bool err = u(rng) < err_rate;
      in.pred.values(i) = err ? 1 - in.gt.values(i) : in.gt.values(i);
      in.q.values(i) = std::round(u(rng) * 20.0) / 20.0;
    }
    return in;
  }
};

TEST(Confusion, MatchesLoopOracle) {
  Random r(1);
  for (int iter = 0; iter < 50; ++iter) {
    const Instance in = r.instance(256, 0.3);
    LabelMap mask{{256}, LabelArray(256)};
    for (auto& v : mask.values) v = static_cast<std::uint8_t>(r.rng() % 2);
    for (const LabelMap* m : {static_cast<const LabelMap*>(nullptr), static_cast<const LabelMap*>(&mask)}) {
      ConfusionCounts o;
      for (int i = 0; i < 256; ++i) {
        if (m && !m->values(i)) continue;
        const int p = in.pred.values(i), g = in.gt.values(i);
        (p && g ? o.tp : !p && !g ? o.tn : p ? o.fp : o.fn)++;
      }
      EXPECT_EQ(confusion(in.pred, in.gt, m), o);
    }
  }
}

TEST(Confusion, TrivialCasesAndDimCheck) {
  LabelMap ones{{5}, LabelArray::Ones(5)};
  LabelMap zeros{{5}, LabelArray::Zero(5)};
  EXPECT_EQ(confusion(ones, ones), (ConfusionCounts{5, 0, 0, 0}));
  EXPECT_EQ(confusion(ones, zeros).fp, 5u);
  LabelMap other{{6}, LabelArray::Zero(6)};
  EXPECT_THROW(confusion(ones, other), Error);
}

TEST(Dice, Values) {
  EXPECT_DOUBLE_EQ(dice(10, 5, 3).value, 20.0 / 28.0);
  EXPECT_NEAR(dice(10, 5, 3).value, 0.714286, 5e-7);
  EXPECT_EQ(dice(7, 0, 0).value, 1.0);
  EXPECT_FALSE(dice(7, 0, 0).degenerate);
  EXPECT_EQ(dice(0, 0, 0).value, 1.0);
  EXPECT_TRUE(dice(0, 0, 0).degenerate);
  EXPECT_EQ(dice(0, 3, 0).value, 0.0);
}

TEST(Dice, MonotoneInErrors) {
  for (std::uint64_t tp = 0; tp < 6; ++tp)
    for (std::uint64_t fp = 0; fp < 6; ++fp)
      for (std::uint64_t fn = 0; fn < 6; ++fn) {
        if (tp + fp + fn == 0) continue;
        const double d = dice(tp, fp, fn).value;
        EXPECT_GE(d, 0.0);
        EXPECT_LE(d, 1.0);
        EXPECT_LE(dice(tp, fp + 1, fn).value, d);
        EXPECT_LE(dice(tp, fp, fn + 1).value, d);
      }
}

TEST(Overlap, SixSharedOfTenAndTen) {
  // 10 error voxels (indices 0..9), 10 uncertain voxels (4..13), 6 shared.
  const std::size_t n = 20;
  LabelMap gt{{n}, LabelArray::Zero(n)};
  LabelMap pred{{n}, LabelArray::Zero(n)};
  UncertaintyMap q{{n}, VoxelArray<double>::Zero(n)};
  for (std::size_t i = 0; i < 10; ++i) pred.values(i) = 1;
  for (std::size_t i = 4; i < 14; ++i) q.values(i) = 0.9;
  const DiceScore d = uncertainty_error_overlap(q, 0.5, pred, gt);
  EXPECT_EQ(d.value, 0.6);
}

TEST(Overlap, IdenticalAndDisjointMaps) {
  const Instance in = from_counts(3, 4, 2, 2, 0, 0, 2, 2);
  EXPECT_EQ(uncertainty_error_overlap(in.q, 0.5, in.pred, in.gt).value, 1.0);
  const Instance dis = from_counts(3, 4, 2, 2, 1, 1, 0, 0);
  EXPECT_EQ(uncertainty_error_overlap(dis.q, 0.5, dis.pred, dis.gt).value, 0.0);
}

TEST(Overlap, SetOracleAndSymmetry) {
  Random r(4);
  for (int iter = 0; iter < 200; ++iter) {
    const Instance in = r.instance(60, 0.25);
    const double tau = 0.05 * (1 + r.rng() % 19);
    std::set<int> err, unc;
    for (int i = 0; i < 60; ++i) {
      if (in.pred.values(i) != in.gt.values(i)) err.insert(i);
      if (in.q.values(i) >= tau) unc.insert(i);
    }
    std::size_t shared = 0;
    for (int i : err) shared += unc.count(i);
    const DiceScore d = uncertainty_error_overlap(in.q, tau, in.pred, in.gt);
    if (err.empty() && unc.empty()) {
      EXPECT_TRUE(d.degenerate);
    } else {
      EXPECT_EQ(d.value, static_cast<double>(2 * shared) / static_cast<double>(err.size() + unc.size()));
    }
  }
}

TEST(UncertainConfusion, OracleAndMonotonicity) {
  Random r(5);
  for (int iter = 0; iter < 50; ++iter) {
    const Instance in = r.instance(200, 0.3);
    UncertainConfusion prev;
    for (int k = 0; k <= 21; ++k) {
      const double tau = k / 20.0;
      const UncertainConfusion u = uncertain_confusion(in.q, tau, in.pred, in.gt);
      UncertainConfusion o;
      for (int i = 0; i < 200; ++i) {
        if (in.q.values(i) < tau) continue;
        const int p = in.pred.values(i), g = in.gt.values(i);
        (p && g ? o.tpu : !p && !g ? o.tnu : p ? o.fpu : o.fnu)++;
      }
      EXPECT_EQ(u.tpu, o.tpu);
      EXPECT_EQ(u.tnu, o.tnu);
      EXPECT_EQ(u.fpu, o.fpu);
      EXPECT_EQ(u.fnu, o.fnu);
      if (k == 0) {
        const ConfusionCounts c = confusion(in.pred, in.gt);
        EXPECT_EQ(u.tpu, c.tp);
        EXPECT_EQ(u.fnu, c.fn);
      } else {
        EXPECT_LE(u.tpu, prev.tpu);
        EXPECT_LE(u.tnu, prev.tnu);
        EXPECT_LE(u.fpu, prev.fpu);
        EXPECT_LE(u.fnu, prev.fnu);
      }
      if (k == 21) EXPECT_EQ(u.tpu + u.tnu + u.fpu + u.fnu, 0u);
      prev = u;
    }
  }
}

TEST(Benefit, WorkedExample) {
  const ConfusionCounts c{10, 50, 5, 3};
  UncertainConfusion u;
  u.tpu = 1;
  u.fpu = 4;
  EXPECT_TRUE(fp_removal_benefit(c, u));
  const Instance in = from_counts(10, 50, 5, 3, 1, 0, 4, 0);
  const auto [corrected, out] = apply_fp_removal(in.pred, in.q, 0.5, in.gt);
  EXPECT_DOUBLE_EQ(out.dice_before.value, 20.0 / 28.0);
  EXPECT_DOUBLE_EQ(out.dice_after.value, 18.0 / 23.0);
  EXPECT_TRUE(out.benefit_predicted);
  EXPECT_EQ(out.voxels_removed, 5u);
  EXPECT_EQ(out.counts_after, (ConfusionCounts{9, 54, 1, 4}));
}

TEST(Benefit, ForcedCases) {
  UncertainConfusion u;
  u.tpu = 2;
  EXPECT_FALSE(fp_removal_benefit({5, 0, 3, 1}, u));
  u = {};
  u.fpu = 1;
  EXPECT_TRUE(fp_removal_benefit({5, 0, 3, 1}, u));
  EXPECT_TRUE(fp_removal_accuracy_benefit(u));
  u = {};
  u.fnu = 1;
  EXPECT_TRUE(fn_addition_benefit({5, 0, 3, 1}, u));
  u = {};
  u.tnu = 3;
  EXPECT_FALSE(fn_addition_benefit({5, 4, 3, 1}, u));
}

// Every tuple with counts <= 7: the inequality matches the exact Dice change
// whenever both Dice values are defined.
TEST(Benefit, ExhaustiveEquivalenceSmallCounts) {
  std::size_t checked = 0;
  for (long long tp = 0; tp <= 7; ++tp)
    for (long long fp = 0; fp <= 7; ++fp)
      for (long long fn = 0; fn <= 7; ++fn)
        for (long long tpu = 0; tpu <= tp; ++tpu)
          for (long long fpu = 0; fpu <= fp; ++fpu) {
            const auto before = dice_oracle(tp, fp, fn);
            const auto after = dice_oracle(tp - tpu, fp - fpu, fn + tpu);
            if (!before || !after) continue;
            UncertainConfusion u;
            u.tpu = static_cast<std::uint64_t>(tpu);
            u.fpu = static_cast<std::uint64_t>(fpu);
            const ConfusionCounts c{static_cast<std::uint64_t>(tp), 0, static_cast<std::uint64_t>(fp),
                                    static_cast<std::uint64_t>(fn)};
            ASSERT_EQ(fp_removal_benefit(c, u), *after > *before)
                << tp << " " << fp << " " << fn << " " << tpu << " " << fpu;
            ++checked;
          }
  EXPECT_GT(checked, 10000u);
}

TEST(Benefit, FnAdditionEquivalenceSmallCounts) {
  for (long long tp = 0; tp <= 6; ++tp)
    for (long long fp = 0; fp <= 6; ++fp)
      for (long long fn = 0; fn <= 6; ++fn)
        for (long long tn = 0; tn <= 6; ++tn)
          for (long long fnu = 0; fnu <= fn; ++fnu)
            for (long long tnu = 0; tnu <= tn; ++tnu) {
              const auto before = dice_oracle(tp, fp, fn);
              const auto after = dice_oracle(tp + fnu, fp + tnu, fn - fnu);
              if (!before || !after) continue;
              UncertainConfusion u;
              u.fnu = static_cast<std::uint64_t>(fnu);
              u.tnu = static_cast<std::uint64_t>(tnu);
              const ConfusionCounts c{static_cast<std::uint64_t>(tp), static_cast<std::uint64_t>(tn),
                                      static_cast<std::uint64_t>(fp), static_cast<std::uint64_t>(fn)};
              ASSERT_EQ(fn_addition_benefit(c, u), *after > *before);
            }
}

TEST(Correction, MapLevelOutcomeMatchesPrediction) {
  Random r(6);
  for (int iter = 0; iter < 300; ++iter) {
    const Instance in = r.instance(80, 0.3);
    const double tau = 0.05 * (1 + r.rng() % 19);
    const auto [removed, out] = apply_fp_removal(in.pred, in.q, tau, in.gt);
    if (!out.dice_before.degenerate && !out.dice_after.degenerate)
      EXPECT_EQ(out.benefit_predicted, out.dice_after.value > out.dice_before.value);
    for (int i = 0; i < 80; ++i) {
      const bool flip = in.pred.values(i) == 1 && in.q.values(i) >= tau;
      EXPECT_EQ(removed.values(i), flip ? 0 : in.pred.values(i));
    }
    const auto [added, out2] = apply_fn_addition(in.pred, in.q, tau, in.gt);
    if (!out2.dice_before.degenerate && !out2.dice_after.degenerate)
      EXPECT_EQ(out2.benefit_predicted, out2.dice_after.value > out2.dice_before.value);
    EXPECT_EQ(out2.voxels_added, static_cast<std::uint64_t>(((in.pred.values == 0) && (in.q.values >= tau)).count()));
    (void)added;
  }
}

TEST(Correction, ThresholdAboveMaxLeavesPredictionUnchanged) {
  const Instance in = from_counts(4, 4, 2, 1, 1, 1, 1, 1);
  const auto [p, out] = apply_fp_removal(in.pred, in.q, 1.5, in.gt);
  EXPECT_TRUE((p.values == in.pred.values).all());
  EXPECT_EQ(out.dice_after.value, out.dice_before.value);
}

TEST(Correction, UncertaintyOnFalsePositivesOnlyGivesPerfectDice) {
  const Instance in = from_counts(6, 6, 3, 0, 0, 0, 3, 0);
  const auto [p, out] = apply_fp_removal(in.pred, in.q, 0.5, in.gt);
  EXPECT_EQ(out.dice_after.value, 1.0);
  EXPECT_TRUE(out.benefit_predicted);
}

TEST(TauGrid, DefaultAndParsing) {
  const auto g = default_tau_grid();
  ASSERT_EQ(g.size(), 19u);
  EXPECT_EQ(g.front(), 0.05);
  EXPECT_EQ(g[1], 0.1);
  EXPECT_EQ(g.back(), 0.95);
  EXPECT_EQ(parse_tau_grid("0.05:0.95:0.05"), g);
  EXPECT_EQ(parse_tau_grid("0.2,0.4,0.6"), (std::vector<double>{0.2, 0.4, 0.6}));
  EXPECT_EQ(parse_tau_grid("0.5"), (std::vector<double>{0.5}));
  EXPECT_THROW(parse_tau_grid("0:1:0.1"), Error);
  EXPECT_THROW(parse_tau_grid("0.5,0.4"), Error);
  EXPECT_THROW(parse_tau_grid("abc"), Error);
  EXPECT_THROW(parse_tau_grid("0.1:0.5:0"), Error);
}

TEST(Profile, MatchesPerThresholdCounts) {
  Random r(7);
  const auto grid = default_tau_grid();
  for (int iter = 0; iter < 30; ++iter) {
    const Instance in = r.instance(300, 0.3);
    const ThresholdProfile p = threshold_profile(in.q, in.pred, in.gt, grid);
    EXPECT_EQ(p.counts, confusion(in.pred, in.gt));
    ASSERT_EQ(p.per_tau.size(), grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k) EXPECT_EQ(p.per_tau[k], uncertain_confusion(in.q, grid[k], in.pred, in.gt));
  }
}

TEST(Bnf, Counting) {
  std::vector<std::pair<ConfusionCounts, UncertainConfusion>> s;
  UncertainConfusion yes;
  yes.fpu = 2;
  UncertainConfusion no;
  no.tpu = 2;
  for (int i = 0; i < 5; ++i) s.push_back({{10, 10, 5, 5}, i < 2 ? yes : no});
  EXPECT_EQ(bnf(s), 0.4);
  for (auto& e : s) e.second = yes;
  EXPECT_EQ(bnf(s), 1.0);
  for (auto& e : s) e.second = no;
  EXPECT_EQ(bnf(s), 0.0);
  EXPECT_THROW(bnf({}), Error);
}

TEST(Sweep, UncertaintyEqualToErrorIsPerfectAtEveryThreshold) {
  const auto grid = default_tau_grid();
  std::vector<ThresholdProfile> profiles;
  Random r(8);
  for (int s = 0; s < 4; ++s) {
    Instance in = r.instance(100, 0.2);
    for (int i = 0; i < 100; ++i) in.q.values(i) = in.pred.values(i) != in.gt.values(i) ? 1.0 : 0.0;
    profiles.push_back(threshold_profile(in.q, in.pred, in.gt, grid));
  }
  const SweepResult res = sweep_thresholds(profiles, grid);
  for (const auto& row : res.rows) EXPECT_EQ(row.mean_overlap, 1.0);
  EXPECT_EQ(res.best_tau_overlap(), grid.front());
}

TEST(Sweep, SingleThresholdAndConstantZeroUncertainty) {
  const std::vector<double> grid = {0.3};
  const Instance in = from_counts(5, 5, 2, 2, 0, 0, 0, 0);
  const std::vector<ThresholdProfile> p = {threshold_profile(in.q, in.pred, in.gt, grid)};
  const SweepResult res = sweep_thresholds(p, grid);
  EXPECT_EQ(res.best_tau_overlap(), 0.3);
  EXPECT_EQ(res.best_tau_bnf(), 0.3);
  EXPECT_EQ(res.rows[0].mean_overlap, 0.0);
  EXPECT_EQ(res.rows[0].bnf, 0.0);
}

TEST(Sweep, TiesGoToSmallerThresholdAndDegenerateSubjectsAreExcluded) {
  const auto grid = std::vector<double>{0.25, 0.5, 0.75};
  // Perfect prediction and no uncertainty: overlap degenerate everywhere.
  const Instance perfect = from_counts(4, 4, 0, 0, 0, 0, 0, 0);
  // q = 0.6 on every error voxel: overlap 1 for tau <= 0.5, 0 at 0.75.
  Instance noisy = from_counts(4, 4, 2, 2, 0, 0, 2, 2);
  noisy.q.values *= 0.6;
  const std::vector<ThresholdProfile> p = {threshold_profile(perfect.q, perfect.pred, perfect.gt, grid),
                                           threshold_profile(noisy.q, noisy.pred, noisy.gt, grid)};
  const SweepResult res = sweep_thresholds(p, grid);
  EXPECT_EQ(res.rows[0].overlap_subjects, 1u);
  EXPECT_EQ(res.rows[0].mean_overlap, 1.0);
  EXPECT_EQ(res.rows[1].mean_overlap, 1.0);
  EXPECT_EQ(res.rows[2].mean_overlap, 0.0);
  EXPECT_EQ(res.best_tau_overlap(), 0.25);
}

}  // namespace
}  // namespace suq
