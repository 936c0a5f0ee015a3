#include "suq/uncertainty.hpp"

#include <limits>

#include "suq/tensor_io.hpp"

namespace suq {
namespace {

[[noreturn]] void fail(ErrorKind kind, const std::string& msg) { throw Error(kind, msg); }

void extend(ValueRange& range, bool& any, const VoxelArray<double>& values) {
  if (values.size() == 0) return;
  const double lo = values.minCoeff();
  const double hi = values.maxCoeff();
  if (!any) {
    range = {lo, hi};
    any = true;
    return;
  }
  range.min = std::min(range.min, lo);
  range.max = std::max(range.max, hi);
}

RawField read_raw(const std::filesystem::path& path) {
  try {
    return to_raw_field(read_tensor(path));
  } catch (const Error& e) {
    fail(e.kind(), path.string() + ": " + e.what());
  }
}

ProbMap read_prob(const std::filesystem::path& path) {
  try {
    return to_prob_map(read_tensor(path));
  } catch (const Error& e) {
    fail(e.kind(), path.string() + ": " + e.what());
  }
}

}  // namespace

ProbMap uncertainty_to_confidence(const LabelMap& labels, const UncertaintyMap& q) {
  require_same_dims(labels.dims, q.dims, "uncertainty_to_confidence");
  return {q.dims, uncertainty_to_confidence(labels.values, q.values).eval()};
}

LabelMap threshold_prediction(const ProbMap& prob) {
  return {prob.dims, threshold_prediction(prob.values)};
}

ValueRange global_range(std::span<const RawField> fields) {
  if (fields.empty()) fail(ErrorKind::invalid_argument, "global normalization of an empty field list");
  ValueRange range;
  bool any = false;
  for (const RawField& f : fields) extend(range, any, f.values);
  if (!any) fail(ErrorKind::invalid_argument, "global normalization over zero voxels");
  return range;
}

UncertaintyMap min_max_normalize(const RawField& field, const ValueRange& range) {
  const double span = range.max - range.min;
  if (!(span > 0.0)) return {field.dims, VoxelArray<double>::Zero(field.values.size())};
  return {field.dims, ((field.values - range.min) / span).max(0.0).min(1.0).eval()};
}

std::vector<UncertaintyMap> normalize_variance_global(std::span<const RawField> variances) {
  const ValueRange range = global_range(variances);
  std::vector<UncertaintyMap> out;
  out.reserve(variances.size());
  for (const RawField& v : variances) out.push_back(min_max_normalize(v, range));
  return out;
}

UncertaintyMap normalize_subjectwise(const RawField& raw) {
  if (raw.values.size() == 0) return {raw.dims, {}};
  return min_max_normalize(raw, ValueRange{raw.values.minCoeff(), raw.values.maxCoeff()});
}

MethodOutputs outputs_from_probability(ProbMap prob) {
  MethodOutputs out;
  out.prediction = threshold_prediction(prob);
  out.uncertainty = normalized_entropy(prob);
  out.confidence = prob;
  out.probability = std::move(prob);
  return out;
}

MethodOutputs outputs_from_aleatoric(ProbMap prediction, const RawField& variance, const ValueRange& range) {
  require_same_dims(prediction.dims, variance.dims, "aleatoric prediction/variance");
  MethodOutputs out;
  out.prediction = threshold_prediction(prediction);
  out.uncertainty = min_max_normalize(variance, range);
  out.confidence = uncertainty_to_confidence(out.prediction, out.uncertainty);
  out.probability = std::move(prediction);
  return out;
}

MethodOutputs outputs_from_auxiliary(LabelMap prediction, const RawField& raw) {
  require_same_dims(prediction.dims, raw.dims, "auxiliary labels/uncertainty");
  MethodOutputs out;
  out.uncertainty = normalize_subjectwise(raw);
  out.confidence = uncertainty_to_confidence(prediction, out.uncertainty);
  out.prediction = std::move(prediction);
  return out;
}

DerivationContext prepare_derivation(const DatasetManifest& manifest, std::vector<std::string>* skipped) {
  DerivationContext ctx;
  for (const std::string& name : manifest.method_names()) {
    if (manifest.kind_of(name) != MethodKind::aleatoric) continue;
    ValueRange range;
    bool any = false;
    for (const SubjectEntry& s : manifest.subjects) {
      auto it = s.methods.find(name);
      if (it == s.methods.end()) continue;
      try {
        extend(range, any, read_raw(it->second.variance).values);
      } catch (const Error& e) {
        if (!skipped) throw;
        skipped->push_back(name + "/" + s.subject_id + ": " + e.what());
      }
    }
    if (any) ctx.aleatoric_ranges.emplace(name, range);
  }
  return ctx;
}

MethodOutputs derive_method_outputs(const DatasetManifest& manifest, const SubjectEntry& subject,
                                    const std::string& method, const DerivationContext& context) {
  auto it = subject.methods.find(method);
  if (it == subject.methods.end())
    fail(ErrorKind::invalid_argument, "subject '" + subject.subject_id + "' has no method '" + method + "'");
  const MethodInput& in = it->second;

  switch (in.kind) {
    case MethodKind::single_prob:
      return outputs_from_probability(read_prob(in.prob));
    case MethodKind::sample_stack:
    case MethodKind::ensemble_stack: {
      const SampleStack stack = read_sample_stack(in.stack);
      const std::size_t declared =
          in.kind == MethodKind::sample_stack ? manifest.declared_T : manifest.declared_K;
      if (stack.n_samples() != declared) {
        fail(ErrorKind::dim_mismatch, in.stack.string() + ": " + std::to_string(stack.n_samples()) +
                                          " samples, manifest declares " + std::to_string(declared));
      }
      return outputs_from_stack(stack);
    }
    case MethodKind::aleatoric: {
      auto r = context.aleatoric_ranges.find(method);
      if (r == context.aleatoric_ranges.end()) {
        fail(ErrorKind::missing_statistics,
             "aleatoric method '" + method + "' needs dataset-wide variance extrema first");
      }
      return outputs_from_aleatoric(read_prob(in.prob), read_raw(in.variance), r->second);
    }
    case MethodKind::auxiliary: {
      LabelMap labels;
      try {
        labels = to_label_map(read_tensor(in.labels));
      } catch (const Error& e) {
        fail(e.kind(), in.labels.string() + ": " + e.what());
      }
      return outputs_from_auxiliary(std::move(labels), read_raw(in.uncertainty));
    }
  }
  fail(ErrorKind::invalid_argument, "unhandled method kind");
}

}  // namespace suq
