#ifndef SUQ_UNCERTAINTY_HPP
#define SUQ_UNCERTAINTY_HPP

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "suq/manifest.hpp"
#include "suq/types.hpp"

namespace suq {

/// Lower clamp applied to arguments of the logarithm only.
inline constexpr double kLogEpsilon = 1e-12;

/// Foreground threshold; ties go to foreground.
inline constexpr double kPredictionThreshold = 0.5;

namespace detail {

template <typename Scalar>
Scalar entropy_term(Scalar x) {
  // No upper clamp: log(1) is already finite, and clamping at 1 - eps would add
  // about 1.4e-12 of spurious entropy whenever 1 - p rounds to 1.
  return x * std::log(std::max(x, static_cast<Scalar>(kLogEpsilon)));
}

}  // namespace detail

/// Binary entropy of p in nats divided by log 2. Exactly 0 at p in {0,1}.
template <typename Scalar>
Scalar binary_normalized_entropy(Scalar p) {
  if (!(p > Scalar(0) && p < Scalar(1))) return Scalar(0);
  const Scalar h = -(detail::entropy_term(p) + detail::entropy_term(Scalar(1) - p)) /
                   std::numbers::ln2_v<Scalar>;
  return std::min(h, Scalar(1));
}

template <typename Derived>
auto normalized_entropy(const Eigen::ArrayBase<Derived>& p) {
  using Scalar = typename Derived::Scalar;
  return p.unaryExpr([](Scalar v) { return binary_normalized_entropy(v); });
}

template <typename Scalar>
UncertaintyMapT<Scalar> normalized_entropy(const ProbMapT<Scalar>& prob) {
  return {prob.dims, normalized_entropy(prob.values).eval()};
}

/// Voxel-wise mean over the sample axis, accumulated in double.
template <typename Scalar>
ProbMap mean_probability(const SampleStackT<Scalar>& stack) {
  VoxelArray<double> acc = VoxelArray<double>::Zero(stack.samples.cols());
  for (Eigen::Index t = 0; t < stack.samples.rows(); ++t)
    acc += stack.samples.row(t).transpose().template cast<double>();
  acc /= static_cast<double>(stack.samples.rows());
  return {stack.dims, acc.min(1.0).max(0.0)};
}

/// Confidence as foreground probability: y(1 - q/2) + (1 - y)(q/2).
template <typename DerivedY, typename DerivedQ>
auto uncertainty_to_confidence(const Eigen::ArrayBase<DerivedY>& labels,
                               const Eigen::ArrayBase<DerivedQ>& q) {
  using Scalar = typename DerivedQ::Scalar;
  const auto y = labels.template cast<Scalar>();
  return y * (Scalar(1) - Scalar(0.5) * q) + (Scalar(1) - y) * (Scalar(0.5) * q);
}

ProbMap uncertainty_to_confidence(const LabelMap& labels, const UncertaintyMap& q);

template <typename Derived>
LabelArray threshold_prediction(const Eigen::ArrayBase<Derived>& prob) {
  using Scalar = typename Derived::Scalar;
  return (prob >= Scalar(kPredictionThreshold)).template cast<std::uint8_t>();
}

LabelMap threshold_prediction(const ProbMap& prob);

struct ValueRange {
  double min = 0.0;
  double max = 0.0;
};

/// Extrema over every voxel of every field. Throws invalid_argument when no voxel exists.
ValueRange global_range(std::span<const RawField> fields);

/// (x - min) / (max - min), all zeros when max == min.
UncertaintyMap min_max_normalize(const RawField& field, const ValueRange& range);

/// Aleatoric variances normalized to [0,1] with dataset-wide extrema.
std::vector<UncertaintyMap> normalize_variance_global(std::span<const RawField> variances);

/// Per-subject min-max normalization (auxiliary outputs).
UncertaintyMap normalize_subjectwise(const RawField& raw);

/// Prediction, uncertainty and calibration confidence of one method on one subject.
struct MethodOutputs {
  LabelMap prediction;
  UncertaintyMap uncertainty;
  /// Foreground probability used for reliability binning. For probability-based
  /// methods this is the (fused) model probability; otherwise the translated uncertainty.
  ProbMap confidence;
  std::optional<ProbMap> probability;
};

MethodOutputs outputs_from_probability(ProbMap prob);
template <typename Scalar>
MethodOutputs outputs_from_stack(const SampleStackT<Scalar>& stack) {
  return outputs_from_probability(mean_probability(stack));
}
MethodOutputs outputs_from_aleatoric(ProbMap prediction, const RawField& variance, const ValueRange& range);
MethodOutputs outputs_from_auxiliary(LabelMap prediction, const RawField& raw);

/// Dataset-wide state that some methods need before per-subject derivation.
struct DerivationContext {
  std::map<std::string, ValueRange> aleatoric_ranges;
};

/// First pass over all subjects: variance extrema for every aleatoric method.
/// With `skipped`, unreadable variance files are recorded there and left out
/// instead of aborting the pass.
DerivationContext prepare_derivation(const DatasetManifest& manifest,
                                     std::vector<std::string>* skipped = nullptr);

MethodOutputs derive_method_outputs(const DatasetManifest& manifest, const SubjectEntry& subject,
                                    const std::string& method, const DerivationContext& context);

}  // namespace suq

#endif  // SUQ_UNCERTAINTY_HPP
