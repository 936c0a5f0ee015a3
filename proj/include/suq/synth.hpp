#ifndef SUQ_SYNTH_HPP
#define SUQ_SYNTH_HPP

// Synthetic subjects with known calibration. Every random draw is a pure
// function of (seed, stream, subject, voxel), so results do not depend on
// generation order or threading.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "suq/manifest.hpp"
#include "suq/types.hpp"

namespace suq {

/// Uniform double in [0,1) keyed by a counter tuple.
double counter_uniform(std::uint64_t seed, std::uint64_t stream, std::uint64_t subject, std::uint64_t index);

enum class CurveKind { identity, shift, power };

/// Maps a true foreground probability to the reported one, clamped to [0,1].
struct CalibrationCurve {
  CurveKind kind = CurveKind::identity;
  double parameter = 0.0;  // delta for shift, gamma for power

  static CalibrationCurve identity() { return {}; }
  static CalibrationCurve shift(double delta) { return {CurveKind::shift, delta}; }
  static CalibrationCurve power(double gamma) { return {CurveKind::power, gamma}; }

  double apply(double p) const;
  double invert(double p) const;
};

/// Which probability the base field defines; the other follows from the curve.
enum class ProbabilityAnchor { true_probability, reported_probability };

struct SynthConfig {
  Dims dims{100, 100, 100};
  double foreground_prior = 0.3;
  CalibrationCurve curve;
  std::size_t n_samples = 20;
  /// Half-width of the uniform per-sample perturbation in stacks.
  double jitter = 0.1;
  /// Base probabilities are uniform in [low, 0.5) outside and [0.5, high] inside the foreground.
  double prob_low = 0.2;
  double prob_high = 0.8;
  ProbabilityAnchor anchor = ProbabilityAnchor::true_probability;
  std::uint64_t seed = 0;
  /// Selects the base probability field.
  std::uint64_t field_index = 0;
  /// Selects label and sample draws.
  std::uint64_t subject_index = 0;

  /// Throws invalid_argument.
  void validate() const;
};

struct SynthSubject {
  LabelMap ground_truth;
  ProbMap prob;  // what the model reports
  ProbMap true_prob;
  std::optional<SampleStack> stack;
};

/// Ground truth is Bernoulli(true_prob) per voxel. With the identity curve the
/// reported probabilities are calibrated by construction.
SynthSubject generate_subject(const SynthConfig& config);

/// Per-sample probabilities: base + jitter * U(-1,1), clamped, `stream_offset`
/// separating independent stacks of one subject.
SampleStack generate_sample_stack(const SynthConfig& config, const ProbMap& base, std::uint64_t stream_offset = 0);
SampleStack generate_sample_stack(const SynthConfig& config);

/// Subject A reports shift(+delta), subject B shift(-delta), over the same
/// reported-probability field. Pooled bins are near-calibrated while each
/// subject alone is miscalibrated by about delta.
std::pair<SynthSubject, SynthSubject> generate_masking_pair(double delta, SynthConfig base = {});

/// Recipe for a synthetic dataset written to disk with a manifest.
struct SynthDatasetConfig {
  std::string dataset_name = "synthetic";
  std::size_t n_subjects = 3;
  SynthConfig subject;
  /// Cycled over subjects; empty means `subject.curve` for all.
  std::vector<CalibrationCurve> curves;
  std::size_t n_models = 10;
  /// Method names to emit: baseline, baseline+MC, ensemble, aleatoric, auxiliary.
  std::vector<std::string> methods{"baseline", "baseline+MC", "ensemble", "aleatoric", "auxiliary"};
  bool write_mask = false;
};

SynthDatasetConfig parse_synth_config(std::string_view json_text);
SynthDatasetConfig load_synth_config(const std::filesystem::path& path);

/// Writes tensors and manifest.json under `out_dir`; returns the manifest path.
std::filesystem::path write_synthetic_dataset(const SynthDatasetConfig& config,
                                              const std::filesystem::path& out_dir);

}  // namespace suq

#endif  // SUQ_SYNTH_HPP
