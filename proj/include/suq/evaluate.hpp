#ifndef SUQ_EVALUATE_HPP
#define SUQ_EVALUATE_HPP

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "suq/calibration.hpp"
#include "suq/error_analysis.hpp"
#include "suq/manifest.hpp"

namespace suq {

struct EvaluationOptions {
  std::size_t n_bins = kDefaultBins;
  std::vector<double> tau_grid = default_tau_grid();
  double epsilon = kDefaultCalibrationEpsilon;
  /// Restrict every metric to the subject's mask when the manifest provides one.
  bool use_mask = false;
  std::size_t workers = 1;
  bool eager_validation = true;
};

/// Everything kept from one (method, subject) evaluation.
struct SubjectResult {
  std::string subject_id;
  bool ok = false;
  std::string error;
  bool mask_applied = false;
  CalibrationReport calibration;
  CalibrationClass calibration_class = CalibrationClass::well_calibrated;
  ConfusionCounts counts;
  DiceScore dice;
  ThresholdProfile profile;
};

struct MethodSummary {
  std::string method;
  MethodKind kind = MethodKind::single_prob;
  std::vector<SubjectResult> subjects;  // manifest order
  std::size_t evaluated = 0;
  std::size_t failed = 0;

  // Dataset level, over evaluated subjects. Empty when none succeeded.
  std::optional<CalibrationReport> pooled;
  double mean_subject_ece = 0.0;
  double mean_dice = 0.0;
  DiceScore pooled_dice;
  std::optional<SweepResult> sweep;
  std::size_t underconfident = 0;
  std::size_t overconfident = 0;
  std::size_t well_calibrated = 0;
};

/// One line of metrics.csv. Subject rows carry that subject's values at the
/// method's best thresholds; the "ALL" row carries dataset aggregates.
struct MetricsRow {
  std::string method;
  std::string subject_id;
  bool ok = true;
  std::string reason;
  std::optional<double> ece;          // subject ECE, or mean subject ECE for ALL
  std::optional<double> ece_pooled;   // ALL only
  std::optional<double> signed_gap;
  std::optional<double> u_e;
  std::optional<double> bnf;          // 0/1 benefit flag for subjects
  std::optional<double> dice;         // subject Dice, or mean subject Dice for ALL
  std::optional<double> dice_pooled;  // ALL only
  std::optional<double> best_tau_ue;
  std::optional<double> best_tau_bnf;
  std::string calibration_class;
  bool dice_degenerate = false;
  bool ue_degenerate = false;
  bool mask_applied = false;
};

inline constexpr const char* kDatasetRowId = "ALL";

struct EvaluationResult {
  std::string dataset_name;
  EvaluationOptions options;
  std::vector<MethodSummary> methods;
  std::vector<MetricsRow> rows;
  std::vector<std::string> failures;

  bool any_failed() const { return !failures.empty(); }
};

/// Per-subject failures are recorded and skipped.
EvaluationResult evaluate(const DatasetManifest& manifest, const EvaluationOptions& options = {});
EvaluationResult evaluate(const std::filesystem::path& manifest_path, const EvaluationOptions& options = {});

/// Reliability bins of one method for one subject, or pooled over all subjects.
ReliabilityBins reliability_bins(const DatasetManifest& manifest, const std::string& method,
                                 const std::optional<std::string>& subject_id,
                                 const EvaluationOptions& options = {});

}  // namespace suq

#endif  // SUQ_EVALUATE_HPP
