#ifndef SUQ_CALIBRATION_HPP
#define SUQ_CALIBRATION_HPP

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "suq/types.hpp"

namespace suq {

__extension__ typedef __int128 Int128;

/// Confidences are accumulated as exact integers in units of 2^-60, so bin sums
/// are associative and pooled results do not depend on partitioning.
inline constexpr int kConfidenceFractionBits = 60;
inline constexpr std::size_t kDefaultBins = 10;
inline constexpr double kDefaultCalibrationEpsilon = 0.02;

std::int64_t to_fixed_confidence(double confidence);

struct BinStats {
  std::uint64_t count = 0;
  Int128 sum_confidence = 0;  // fixed point, 2^-60 units
  std::uint64_t positives = 0;

  double sum_confidence_value() const;
  double mean_confidence() const;
  double accuracy() const;

  bool operator==(const BinStats&) const = default;
};

/// Equal-width reliability bins over [0,1]. Bin b covers [b/n, (b+1)/n); the last
/// bin also holds confidence 1.
class ReliabilityBins {
 public:
  explicit ReliabilityBins(std::size_t n_bins = kDefaultBins);

  std::size_t n_bins() const { return bins_.size(); }
  double lower_edge(std::size_t b) const;
  double upper_edge(std::size_t b) const;
  std::size_t index_of(double confidence) const;

  const BinStats& operator[](std::size_t b) const { return bins_[b]; }
  const std::vector<BinStats>& bins() const { return bins_; }

  std::uint64_t total() const;
  std::size_t occupied() const;

  /// Throws invalid_value for a confidence outside [0,1].
  void add(double confidence, bool positive);
  ReliabilityBins& operator+=(const ReliabilityBins& other);

  bool operator==(const ReliabilityBins&) const = default;

 private:
  std::vector<BinStats> bins_;
};

template <typename DerivedC, typename DerivedL>
ReliabilityBins bin_predictions(const Eigen::ArrayBase<DerivedC>& confidences,
                                const Eigen::ArrayBase<DerivedL>& labels,
                                std::size_t n_bins = kDefaultBins, const LabelArray* mask = nullptr) {
  if (confidences.size() != labels.size() || (mask && mask->size() != labels.size()))
    throw Error(ErrorKind::dim_mismatch, "bin_predictions: size mismatch");
  ReliabilityBins bins(n_bins);
  for (Eigen::Index i = 0; i < confidences.size(); ++i) {
    if (mask && (*mask)(i) == 0) continue;
    bins.add(static_cast<double>(confidences(i)), labels(i) != 0);
  }
  return bins;
}

ReliabilityBins bin_predictions(const ProbMap& confidences, const LabelMap& ground_truth,
                                std::size_t n_bins = kDefaultBins, const LabelMap* mask = nullptr);

/// Count-weighted mean of |mean confidence - accuracy| over occupied bins.
/// Throws invalid_argument when every bin is empty.
double ece(const ReliabilityBins& bins);

/// Count-weighted mean of (confidence - accuracy); positive means the predicted
/// foreground probability exceeds the observed frequency.
double signed_gap(const ReliabilityBins& bins);

/// Throws invalid_argument when binning schemes differ.
ReliabilityBins merge_bins(std::span<const ReliabilityBins> parts);
ReliabilityBins merge_bins(const ReliabilityBins& a, const ReliabilityBins& b);

enum class CalibrationLevel { dataset, subject };
enum class CalibrationClass { underconfident, overconfident, well_calibrated };

const char* to_string(CalibrationLevel level);
const char* to_string(CalibrationClass cls);

struct CalibrationReport {
  CalibrationLevel level = CalibrationLevel::subject;
  std::optional<std::string> subject_id;
  ReliabilityBins bins;
  double ece = 0.0;
  double signed_gap = 0.0;
  bool mask_applied = false;
};

CalibrationReport make_calibration_report(ReliabilityBins bins, CalibrationLevel level,
                                          std::optional<std::string> subject_id = std::nullopt,
                                          bool mask_applied = false);

/// overconfident if gap > epsilon, underconfident if gap < -epsilon.
CalibrationClass classify_subject_calibration(const CalibrationReport& report,
                                              double epsilon = kDefaultCalibrationEpsilon);

struct DiagramRow {
  double bin_lower = 0.0;
  double bin_upper = 0.0;
  std::uint64_t count = 0;
  double mean_confidence = 0.0;
  double accuracy = 0.0;
};

/// One row per occupied bin, in bin order.
std::vector<DiagramRow> reliability_diagram(const ReliabilityBins& bins);

}  // namespace suq

#endif  // SUQ_CALIBRATION_HPP
