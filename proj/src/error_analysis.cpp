#include "suq/error_analysis.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>
#include <string>


namespace suq {
namespace {

[[noreturn]] void fail(ErrorKind kind, const std::string& msg) { throw Error(kind, msg); }

__extension__ typedef unsigned __int128 UInt128;

UInt128 wide(std::uint64_t v) { return static_cast<UInt128>(v); }

enum Region { kTP = 0, kTN = 1, kFP = 2, kFN = 3 };

inline int region_of(std::uint8_t pred, std::uint8_t gt) {
  if (pred) return gt ? kTP : kFP;
  return gt ? kFN : kTN;
}

void check_inputs(const LabelMap& pred, const LabelMap& gt, const LabelMap* mask, const char* ctx) {
  require_same_dims(pred.dims, gt.dims, ctx);
  if (mask) require_same_dims(mask->dims, gt.dims, ctx);
}

void add_region(ConfusionCounts& c, int region) {
  switch (region) {
    case kTP: ++c.tp; break;
    case kTN: ++c.tn; break;
    case kFP: ++c.fp; break;
    default: ++c.fn; break;
  }
}

void add_region(UncertainConfusion& u, int region) {
  switch (region) {
    case kTP: ++u.tpu; break;
    case kTN: ++u.tnu; break;
    case kFP: ++u.fpu; break;
    default: ++u.fnu; break;
  }
}

double round_grid_value(double v) { return std::round(v * 1e12) / 1e12; }

std::pair<LabelMap, CorrectionOutcome> apply_correction(const LabelMap& pred, const UncertaintyMap& q,
                                                        double tau, const LabelMap& gt,
                                                        const LabelMap* mask, bool removal) {
  check_inputs(pred, gt, mask, removal ? "apply_fp_removal" : "apply_fn_addition");
  require_same_dims(q.dims, gt.dims, "correction uncertainty");

  const std::uint8_t target = removal ? 1 : 0;
  LabelMap corrected = pred;
  CorrectionOutcome out;
  out.counts_before = confusion(pred, gt, mask);
  for (Eigen::Index i = 0; i < pred.values.size(); ++i) {
    if (mask && mask->values(i) == 0) continue;
    if (pred.values(i) == target && q.values(i) >= tau) {
      corrected.values(i) = 1 - target;
      ++(removal ? out.voxels_removed : out.voxels_added);
    }
  }
  out.counts_after = confusion(corrected, gt, mask);
  out.dice_before = dice(out.counts_before);
  out.dice_after = dice(out.counts_after);
  const UncertainConfusion u = uncertain_confusion(q, tau, pred, gt, mask);
  out.benefit_predicted = removal ? fp_removal_benefit(out.counts_before, u)
                                  : fn_addition_benefit(out.counts_before, u);
  return {std::move(corrected), out};
}

}  // namespace

ConfusionCounts confusion(const LabelMap& pred, const LabelMap& gt, const LabelMap* mask) {
  check_inputs(pred, gt, mask, "confusion");
  ConfusionCounts c;
  for (Eigen::Index i = 0; i < pred.values.size(); ++i) {
    if (mask && mask->values(i) == 0) continue;
    add_region(c, region_of(pred.values(i), gt.values(i)));
  }
  return c;
}

DiceScore dice(std::uint64_t tp, std::uint64_t fp, std::uint64_t fn) {
  const std::uint64_t denom = 2 * tp + fp + fn;
  if (denom == 0) return {1.0, true};
  return {static_cast<double>(2 * tp) / static_cast<double>(denom), false};
}

DiceScore dice(const ConfusionCounts& c) { return dice(c.tp, c.fp, c.fn); }

bool dice_improves(const ConfusionCounts& before, const ConfusionCounts& after) {
  const UInt128 db = 2 * wide(before.tp) + before.fp + before.fn;
  const UInt128 da = 2 * wide(after.tp) + after.fp + after.fn;
  // Dice(0,0,0) = 1 on either side
  const UInt128 nb = db == 0 ? 1 : 2 * wide(before.tp);
  const UInt128 na = da == 0 ? 1 : 2 * wide(after.tp);
  const UInt128 dbb = db == 0 ? 1 : db;
  const UInt128 daa = da == 0 ? 1 : da;
  return na * dbb > nb * daa;
}

UncertainConfusion uncertain_confusion(const UncertaintyMap& q, double tau, const LabelMap& pred,
                                       const LabelMap& gt, const LabelMap* mask) {
  check_inputs(pred, gt, mask, "uncertain_confusion");
  require_same_dims(q.dims, gt.dims, "uncertain_confusion uncertainty");
  UncertainConfusion u;
  u.tau = tau;
  for (Eigen::Index i = 0; i < pred.values.size(); ++i) {
    if (mask && mask->values(i) == 0) continue;
    if (q.values(i) >= tau) add_region(u, region_of(pred.values(i), gt.values(i)));
  }
  return u;
}

DiceScore uncertainty_error_overlap(const ConfusionCounts& c, const UncertainConfusion& u) {
  const std::uint64_t both = u.fpu + u.fnu;
  const std::uint64_t uncertain = u.tpu + u.tnu + u.fpu + u.fnu;
  const std::uint64_t errors = c.fp + c.fn;
  if (uncertain + errors == 0) return {1.0, true};
  return {static_cast<double>(2 * both) / static_cast<double>(uncertain + errors), false};
}

DiceScore uncertainty_error_overlap(const UncertaintyMap& q, double tau, const LabelMap& pred,
                                    const LabelMap& gt, const LabelMap* mask) {
  return uncertainty_error_overlap(confusion(pred, gt, mask), uncertain_confusion(q, tau, pred, gt, mask));
}

bool fp_removal_benefit(const ConfusionCounts& c, const UncertainConfusion& u) {
  return wide(u.fpu) * c.tp > wide(u.tpu) * (wide(c.tp) + c.fp + c.fn);
}

bool fp_removal_accuracy_benefit(const UncertainConfusion& u) { return u.fpu > u.tpu; }

bool fn_addition_benefit(const ConfusionCounts& c, const UncertainConfusion& u) {
  return wide(u.fnu) * (wide(c.tp) + c.fp + c.fn) > wide(u.tnu) * c.tp;
}

std::pair<LabelMap, CorrectionOutcome> apply_fp_removal(const LabelMap& pred, const UncertaintyMap& q,
                                                        double tau, const LabelMap& gt,
                                                        const LabelMap* mask) {
  return apply_correction(pred, q, tau, gt, mask, true);
}

std::pair<LabelMap, CorrectionOutcome> apply_fn_addition(const LabelMap& pred, const UncertaintyMap& q,
                                                         double tau, const LabelMap& gt,
                                                         const LabelMap* mask) {
  return apply_correction(pred, q, tau, gt, mask, false);
}

std::vector<double> default_tau_grid() {
  std::vector<double> grid;
  for (int i = 1; i <= 19; ++i) grid.push_back(round_grid_value(0.05 * i));
  return grid;
}

void validate_tau_grid(std::span<const double> grid) {
  if (grid.empty()) fail(ErrorKind::invalid_argument, "empty threshold grid");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!(grid[i] > 0.0 && grid[i] < 1.0))
      fail(ErrorKind::invalid_argument, "threshold " + std::to_string(grid[i]) + " outside (0,1)");
    if (i > 0 && !(grid[i] > grid[i - 1]))
      fail(ErrorKind::invalid_argument, "threshold grid must be strictly increasing");
  }
}

std::vector<double> parse_tau_grid(const std::string& text) {
  std::vector<double> grid;
  auto number = [&](const std::string& s) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != s.size()) fail(ErrorKind::invalid_argument, "bad threshold grid '" + text + "'");
    return v;
  };

  if (text.find(':') != std::string::npos) {
    std::vector<std::string> parts;
    std::stringstream ss(text);
    for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
    if (parts.size() != 3) fail(ErrorKind::invalid_argument, "threshold grid must be a:b:step, got '" + text + "'");
    const double a = number(parts[0]), b = number(parts[1]), step = number(parts[2]);
    if (!(step > 0.0) || b < a) fail(ErrorKind::invalid_argument, "bad threshold grid '" + text + "'");
    for (long i = 0;; ++i) {
      const double v = a + static_cast<double>(i) * step;
      if (v > b + step * 1e-9) break;
      grid.push_back(round_grid_value(v));
    }
  } else {
    std::stringstream ss(text);
    for (std::string p; std::getline(ss, p, ',');) grid.push_back(number(p));
  }
  validate_tau_grid(grid);
  return grid;
}

ThresholdProfile threshold_profile(const UncertaintyMap& q, const LabelMap& pred, const LabelMap& gt,
                                   std::span<const double> grid, const LabelMap* mask) {
  check_inputs(pred, gt, mask, "threshold_profile");
  require_same_dims(q.dims, gt.dims, "threshold_profile uncertainty");
  validate_tau_grid(grid);

  // hist[region][k]: voxels whose uncertainty reaches exactly k grid thresholds
  const std::size_t levels = grid.size() + 1;
  std::array<std::vector<std::uint64_t>, 4> hist;
  for (auto& h : hist) h.assign(levels, 0);

  ThresholdProfile profile;
  for (Eigen::Index i = 0; i < pred.values.size(); ++i) {
    if (mask && mask->values(i) == 0) continue;
    const int r = region_of(pred.values(i), gt.values(i));
    add_region(profile.counts, r);
    const auto k = static_cast<std::size_t>(std::upper_bound(grid.begin(), grid.end(), q.values(i)) - grid.begin());
    ++hist[r][k];
  }

  profile.per_tau.resize(grid.size());
  std::array<std::uint64_t, 4> running{};
  for (std::size_t i = grid.size(); i-- > 0;) {
    for (int r = 0; r < 4; ++r) running[r] += hist[r][i + 1];
    UncertainConfusion& u = profile.per_tau[i];
    u.tau = grid[i];
    u.tpu = running[kTP];
    u.tnu = running[kTN];
    u.fpu = running[kFP];
    u.fnu = running[kFN];
  }
  return profile;
}

double bnf(std::span<const std::pair<ConfusionCounts, UncertainConfusion>> subjects) {
  if (subjects.empty()) fail(ErrorKind::invalid_argument, "BnF over zero subjects");
  std::size_t benefit = 0;
  for (const auto& [c, u] : subjects) benefit += fp_removal_benefit(c, u) ? 1 : 0;
  return static_cast<double>(benefit) / static_cast<double>(subjects.size());
}

SweepResult sweep_thresholds(std::span<const ThresholdProfile> subjects, std::span<const double> grid) {
  validate_tau_grid(grid);
  if (subjects.empty()) fail(ErrorKind::invalid_argument, "threshold sweep over zero subjects");

  SweepResult result;
  result.rows.resize(grid.size());
  std::vector<std::pair<ConfusionCounts, UncertainConfusion>> at_tau(subjects.size());
  for (std::size_t t = 0; t < grid.size(); ++t) {
    SweepRow& row = result.rows[t];
    row.tau = grid[t];
    double sum = 0.0;
    for (std::size_t s = 0; s < subjects.size(); ++s) {
      if (subjects[s].per_tau.size() != grid.size())
        fail(ErrorKind::invalid_argument, "threshold profile computed on a different grid");
      const UncertainConfusion& u = subjects[s].per_tau[t];
      at_tau[s] = {subjects[s].counts, u};
      const DiceScore overlap = uncertainty_error_overlap(subjects[s].counts, u);
      if (!overlap.degenerate) {
        sum += overlap.value;
        ++row.overlap_subjects;
      }
    }
    row.mean_overlap = row.overlap_subjects ? sum / static_cast<double>(row.overlap_subjects) : 1.0;
    row.bnf = bnf(at_tau);
  }

  bool have_overlap = false;
  for (std::size_t t = 0; t < grid.size(); ++t) {
    const SweepRow& row = result.rows[t];
    if (row.overlap_subjects > 0 &&
        (!have_overlap || row.mean_overlap > result.rows[result.best_overlap_index].mean_overlap)) {
      result.best_overlap_index = t;
      have_overlap = true;
    }
    if (row.bnf > result.rows[result.best_bnf_index].bnf) result.best_bnf_index = t;
  }
  return result;
}

}  // namespace suq
