#ifndef SUQ_ERROR_ANALYSIS_HPP
#define SUQ_ERROR_ANALYSIS_HPP

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "suq/types.hpp"

namespace suq {

struct ConfusionCounts {
  std::uint64_t tp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;

  std::uint64_t total() const { return tp + tn + fp + fn; }
  bool operator==(const ConfusionCounts&) const = default;
};

/// Counts of voxels with uncertainty >= tau inside each confusion region.
struct UncertainConfusion {
  std::uint64_t tpu = 0;
  std::uint64_t tnu = 0;
  std::uint64_t fpu = 0;
  std::uint64_t fnu = 0;
  double tau = 0.0;

  bool operator==(const UncertainConfusion&) const = default;
};

struct DiceScore {
  double value = 1.0;
  /// Both masks empty; value is 1 by convention.
  bool degenerate = false;
};

ConfusionCounts confusion(const LabelMap& pred, const LabelMap& gt, const LabelMap* mask = nullptr);

/// 2tp / (2tp + fp + fn).
DiceScore dice(const ConfusionCounts& c);
DiceScore dice(std::uint64_t tp, std::uint64_t fp, std::uint64_t fn);

/// Exact comparison of dice(after) > dice(before) by cross multiplication.
bool dice_improves(const ConfusionCounts& before, const ConfusionCounts& after);

UncertainConfusion uncertain_confusion(const UncertaintyMap& q, double tau, const LabelMap& pred,
                                       const LabelMap& gt, const LabelMap* mask = nullptr);

/// Dice between the error map and the voxels with q >= tau, from counts.
DiceScore uncertainty_error_overlap(const ConfusionCounts& c, const UncertainConfusion& u);
DiceScore uncertainty_error_overlap(const UncertaintyMap& q, double tau, const LabelMap& pred,
                                    const LabelMap& gt, const LabelMap* mask = nullptr);

/// fpu * tp > tpu * (tp + fp + fn): removing uncertain predicted positives raises Dice.
bool fp_removal_benefit(const ConfusionCounts& c, const UncertainConfusion& u);
/// fpu > tpu: the same removal raises accuracy.
bool fp_removal_accuracy_benefit(const UncertainConfusion& u);
/// fnu * (tp + fp + fn) > tnu * tp: adding uncertain predicted negatives raises Dice.
bool fn_addition_benefit(const ConfusionCounts& c, const UncertainConfusion& u);

struct CorrectionOutcome {
  DiceScore dice_before;
  DiceScore dice_after;
  ConfusionCounts counts_before;
  ConfusionCounts counts_after;
  bool benefit_predicted = false;
  std::uint64_t voxels_removed = 0;
  std::uint64_t voxels_added = 0;
};

/// Sets every predicted-positive voxel with q >= tau to background.
std::pair<LabelMap, CorrectionOutcome> apply_fp_removal(const LabelMap& pred, const UncertaintyMap& q,
                                                        double tau, const LabelMap& gt,
                                                        const LabelMap* mask = nullptr);
/// Sets every predicted-negative voxel with q >= tau to foreground.
std::pair<LabelMap, CorrectionOutcome> apply_fn_addition(const LabelMap& pred, const UncertaintyMap& q,
                                                         double tau, const LabelMap& gt,
                                                         const LabelMap* mask = nullptr);

/// 0.05, 0.10, ..., 0.95.
std::vector<double> default_tau_grid();

/// Parses "a:b:step" (inclusive) or "a,b,c"; every value must lie in (0,1).
std::vector<double> parse_tau_grid(const std::string& text);

/// Sorted grid validation; throws invalid_argument.
void validate_tau_grid(std::span<const double> grid);

/// Confusion and uncertain-confusion counts of one subject at every grid threshold,
/// computed in a single pass over the voxels.
struct ThresholdProfile {
  ConfusionCounts counts;
  std::vector<UncertainConfusion> per_tau;
};

ThresholdProfile threshold_profile(const UncertaintyMap& q, const LabelMap& pred, const LabelMap& gt,
                                   std::span<const double> grid, const LabelMap* mask = nullptr);

/// Fraction of subjects satisfying the false-positive removal benefit.
/// Throws invalid_argument for an empty list.
double bnf(std::span<const std::pair<ConfusionCounts, UncertainConfusion>> subjects);

struct SweepRow {
  double tau = 0.0;
  double mean_overlap = 0.0;
  std::size_t overlap_subjects = 0;  // non-degenerate subjects in the mean
  double bnf = 0.0;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::size_t best_overlap_index = 0;
  std::size_t best_bnf_index = 0;

  double best_tau_overlap() const { return rows[best_overlap_index].tau; }
  double best_tau_bnf() const { return rows[best_bnf_index].tau; }
};

/// Mean overlap (degenerate subjects excluded) and BnF per threshold; best
/// thresholds maximize each metric, ties to the smaller threshold.
SweepResult sweep_thresholds(std::span<const ThresholdProfile> subjects, std::span<const double> grid);

}  // namespace suq

#endif  // SUQ_ERROR_ANALYSIS_HPP
