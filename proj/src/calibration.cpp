#include "suq/calibration.hpp"

#include <algorithm>

namespace suq {
namespace {

[[noreturn]] void fail(ErrorKind kind, const std::string& msg) { throw Error(kind, msg); }

Int128 abs128(Int128 v) { return v < 0 ? -v : v; }

double fixed_to_double(Int128 numerator, std::uint64_t denominator) {
  const long double v = static_cast<long double>(numerator) / static_cast<long double>(denominator);
  return static_cast<double>(std::ldexp(v, -kConfidenceFractionBits));
}

Int128 positives_fixed(const BinStats& b) {
  return static_cast<Int128>(b.positives) << kConfidenceFractionBits;
}

}  // namespace

std::int64_t to_fixed_confidence(double confidence) {
  return std::llround(std::ldexp(confidence, kConfidenceFractionBits));
}

double BinStats::sum_confidence_value() const { return fixed_to_double(sum_confidence, 1); }

double BinStats::mean_confidence() const {
  return count == 0 ? 0.0 : fixed_to_double(sum_confidence, count);
}

double BinStats::accuracy() const {
  return count == 0 ? 0.0 : static_cast<double>(positives) / static_cast<double>(count);
}

ReliabilityBins::ReliabilityBins(std::size_t n_bins) : bins_(n_bins) {
  if (n_bins == 0) fail(ErrorKind::invalid_argument, "reliability binning needs at least one bin");
}

double ReliabilityBins::lower_edge(std::size_t b) const {
  return static_cast<double>(b) / static_cast<double>(n_bins());
}

double ReliabilityBins::upper_edge(std::size_t b) const {
  return b + 1 == n_bins() ? 1.0 : static_cast<double>(b + 1) / static_cast<double>(n_bins());
}

std::size_t ReliabilityBins::index_of(double c) const {
  const std::size_t n = n_bins();
  if (c >= 1.0) return n - 1;
  auto b = static_cast<std::size_t>(c * static_cast<double>(n));
  b = std::min(b, n - 1);
  // keep the index consistent with the stored edges despite rounding in c * n
  if (b > 0 && c < lower_edge(b)) --b;
  if (b + 1 < n && c >= lower_edge(b + 1)) ++b;
  return b;
}

std::uint64_t ReliabilityBins::total() const {
  std::uint64_t n = 0;
  for (const auto& b : bins_) n += b.count;
  return n;
}

std::size_t ReliabilityBins::occupied() const {
  return static_cast<std::size_t>(
      std::count_if(bins_.begin(), bins_.end(), [](const BinStats& b) { return b.count > 0; }));
}

void ReliabilityBins::add(double confidence, bool positive) {
  if (!(confidence >= 0.0 && confidence <= 1.0))
    fail(ErrorKind::invalid_value, "confidence outside [0,1]: " + std::to_string(confidence));
  BinStats& b = bins_[index_of(confidence)];
  ++b.count;
  b.sum_confidence += to_fixed_confidence(confidence);
  b.positives += positive ? 1 : 0;
}

ReliabilityBins& ReliabilityBins::operator+=(const ReliabilityBins& other) {
  if (other.n_bins() != n_bins()) {
    fail(ErrorKind::invalid_argument, "cannot merge " + std::to_string(n_bins()) + "-bin and " +
                                          std::to_string(other.n_bins()) + "-bin reliability data");
  }
  for (std::size_t i = 0; i < bins_.size(); ++i) {
    bins_[i].count += other.bins_[i].count;
    bins_[i].sum_confidence += other.bins_[i].sum_confidence;
    bins_[i].positives += other.bins_[i].positives;
  }
  return *this;
}

ReliabilityBins bin_predictions(const ProbMap& confidences, const LabelMap& ground_truth,
                                std::size_t n_bins, const LabelMap* mask) {
  require_same_dims(confidences.dims, ground_truth.dims, "bin_predictions");
  if (mask) require_same_dims(mask->dims, ground_truth.dims, "bin_predictions mask");
  return bin_predictions(confidences.values, ground_truth.values, n_bins, mask ? &mask->values : nullptr);
}

double ece(const ReliabilityBins& bins) {
  const std::uint64_t n = bins.total();
  if (n == 0) fail(ErrorKind::invalid_argument, "ECE of empty reliability bins");
  Int128 gap = 0;
  for (const BinStats& b : bins.bins()) gap += abs128(b.sum_confidence - positives_fixed(b));
  return fixed_to_double(gap, n);
}

double signed_gap(const ReliabilityBins& bins) {
  const std::uint64_t n = bins.total();
  if (n == 0) fail(ErrorKind::invalid_argument, "calibration gap of empty reliability bins");
  Int128 gap = 0;
  for (const BinStats& b : bins.bins()) gap += b.sum_confidence - positives_fixed(b);
  return fixed_to_double(gap, n);
}

ReliabilityBins merge_bins(std::span<const ReliabilityBins> parts) {
  if (parts.empty()) return ReliabilityBins();
  ReliabilityBins out(parts.front().n_bins());
  for (const auto& p : parts) out += p;
  return out;
}

ReliabilityBins merge_bins(const ReliabilityBins& a, const ReliabilityBins& b) {
  ReliabilityBins out = a;
  out += b;
  return out;
}

const char* to_string(CalibrationLevel level) {
  return level == CalibrationLevel::dataset ? "dataset" : "subject";
}

const char* to_string(CalibrationClass cls) {
  switch (cls) {
    case CalibrationClass::underconfident: return "underconfident";
    case CalibrationClass::overconfident: return "overconfident";
    case CalibrationClass::well_calibrated: return "well_calibrated";
  }
  return "unknown";
}

CalibrationReport make_calibration_report(ReliabilityBins bins, CalibrationLevel level,
                                          std::optional<std::string> subject_id, bool mask_applied) {
  CalibrationReport r;
  r.level = level;
  r.subject_id = std::move(subject_id);
  r.ece = ece(bins);
  r.signed_gap = signed_gap(bins);
  r.bins = std::move(bins);
  r.mask_applied = mask_applied;
  return r;
}

CalibrationClass classify_subject_calibration(const CalibrationReport& report, double epsilon) {
  if (report.signed_gap > epsilon) return CalibrationClass::overconfident;
  if (report.signed_gap < -epsilon) return CalibrationClass::underconfident;
  return CalibrationClass::well_calibrated;
}

std::vector<DiagramRow> reliability_diagram(const ReliabilityBins& bins) {
  std::vector<DiagramRow> rows;
  for (std::size_t b = 0; b < bins.n_bins(); ++b) {
    const BinStats& s = bins[b];
    if (s.count == 0) continue;
    rows.push_back({bins.lower_edge(b), bins.upper_edge(b), s.count, s.mean_confidence(), s.accuracy()});
  }
  return rows;
}

}  // namespace suq
