#include "suq/evaluate.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <functional>
#include <thread>

#include "suq/tensor_io.hpp"
#include "suq/uncertainty.hpp"

namespace suq {
namespace {

[[noreturn]] void fail(ErrorKind kind, const std::string& msg) { throw Error(kind, msg); }

// Runs fn(i) for i in [0, n) on up to `workers` threads. Each index writes only its own slot.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

LabelMap load_labels(const std::filesystem::path& path) {
  try {
    return to_label_map(read_tensor(path));
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::io) throw;
    fail(e.kind(), path.string() + ": " + e.what());
  }
}

struct SubjectInputs {
  MethodOutputs outputs;
  LabelMap ground_truth;
  std::optional<LabelMap> mask;
};

SubjectInputs load_subject(const DatasetManifest& manifest, const SubjectEntry& subject,
                           const std::string& method, const DerivationContext& ctx,
                           const EvaluationOptions& options) {
  if (!options.eager_validation) validate_subject(manifest, subject, method);
  SubjectInputs in;
  in.outputs = derive_method_outputs(manifest, subject, method, ctx);
  in.ground_truth = load_labels(subject.ground_truth);
  require_same_dims(in.outputs.prediction.dims, in.ground_truth.dims, "prediction vs ground truth");
  if (options.use_mask && subject.mask) {
    in.mask = load_labels(*subject.mask);
    require_same_dims(in.mask->dims, in.ground_truth.dims, "mask vs ground truth");
  }
  return in;
}

SubjectResult evaluate_subject(const DatasetManifest& manifest, const SubjectEntry& subject,
                               const std::string& method, const DerivationContext& ctx,
                               const EvaluationOptions& options) {
  SubjectResult r;
  r.subject_id = subject.subject_id;
  try {
    const SubjectInputs in = load_subject(manifest, subject, method, ctx, options);
    const LabelMap* mask = in.mask ? &*in.mask : nullptr;
    r.mask_applied = mask != nullptr;

    r.calibration = make_calibration_report(
        bin_predictions(in.outputs.confidence, in.ground_truth, options.n_bins, mask),
        CalibrationLevel::subject, subject.subject_id, r.mask_applied);
    r.calibration_class = classify_subject_calibration(r.calibration, options.epsilon);
    r.profile = threshold_profile(in.outputs.uncertainty, in.outputs.prediction, in.ground_truth,
                                  options.tau_grid, mask);
    r.counts = r.profile.counts;
    r.dice = dice(r.counts);
    r.ok = true;
  } catch (const std::exception& e) {
    r.ok = false;
    r.error = e.what();
  }
  return r;
}

void summarize(MethodSummary& m, const EvaluationOptions& options, std::vector<MetricsRow>& rows) {
  std::vector<const SubjectResult*> ok;
  for (const auto& s : m.subjects) {
    if (s.ok) ok.push_back(&s);
  }
  m.evaluated = ok.size();
  m.failed = m.subjects.size() - ok.size();

  MetricsRow all;
  all.method = m.method;
  all.subject_id = kDatasetRowId;
  if (ok.empty()) {
    all.ok = false;
    all.reason = "no subject evaluated";
  } else {
    ReliabilityBins pooled(options.n_bins);
    ConfusionCounts total;
    std::vector<ThresholdProfile> profiles;
    double ece_sum = 0.0;
    double dice_sum = 0.0;
    bool any_mask = false;
    for (const SubjectResult* s : ok) {
      pooled += s->calibration.bins;
      total.tp += s->counts.tp;
      total.tn += s->counts.tn;
      total.fp += s->counts.fp;
      total.fn += s->counts.fn;
      profiles.push_back(s->profile);
      ece_sum += s->calibration.ece;
      dice_sum += s->dice.value;
      any_mask = any_mask || s->mask_applied;
      switch (s->calibration_class) {
        case CalibrationClass::underconfident: ++m.underconfident; break;
        case CalibrationClass::overconfident: ++m.overconfident; break;
        case CalibrationClass::well_calibrated: ++m.well_calibrated; break;
      }
    }
    const auto n = static_cast<double>(ok.size());
    m.pooled = make_calibration_report(std::move(pooled), CalibrationLevel::dataset, std::nullopt, any_mask);
    m.mean_subject_ece = ece_sum / n;
    m.mean_dice = dice_sum / n;
    m.pooled_dice = dice(total);
    m.sweep = sweep_thresholds(profiles, options.tau_grid);

    const SweepRow& best_ue = m.sweep->rows[m.sweep->best_overlap_index];
    const SweepRow& best_bnf = m.sweep->rows[m.sweep->best_bnf_index];
    all.ece = m.mean_subject_ece;
    all.ece_pooled = m.pooled->ece;
    all.signed_gap = m.pooled->signed_gap;
    all.u_e = best_ue.mean_overlap;
    all.ue_degenerate = best_ue.overlap_subjects == 0;
    all.bnf = best_bnf.bnf;
    all.dice = m.mean_dice;
    all.dice_pooled = m.pooled_dice.value;
    all.dice_degenerate = m.pooled_dice.degenerate;
    all.best_tau_ue = best_ue.tau;
    all.best_tau_bnf = best_bnf.tau;
    all.calibration_class = to_string(classify_subject_calibration(*m.pooled, options.epsilon));
    all.mask_applied = any_mask;
  }

  for (const auto& s : m.subjects) {
    MetricsRow row;
    row.method = m.method;
    row.subject_id = s.subject_id;
    if (!s.ok) {
      row.ok = false;
      row.reason = s.error;
      rows.push_back(std::move(row));
      continue;
    }
    const std::size_t iu = m.sweep->best_overlap_index;
    const std::size_t ib = m.sweep->best_bnf_index;
    const DiceScore ue = uncertainty_error_overlap(s.counts, s.profile.per_tau[iu]);
    row.ece = s.calibration.ece;
    row.signed_gap = s.calibration.signed_gap;
    row.u_e = ue.value;
    row.ue_degenerate = ue.degenerate;
    row.bnf = fp_removal_benefit(s.counts, s.profile.per_tau[ib]) ? 1.0 : 0.0;
    row.dice = s.dice.value;
    row.dice_degenerate = s.dice.degenerate;
    row.best_tau_ue = m.sweep->rows[iu].tau;
    row.best_tau_bnf = m.sweep->rows[ib].tau;
    row.calibration_class = to_string(s.calibration_class);
    row.mask_applied = s.mask_applied;
    rows.push_back(std::move(row));
  }
  rows.push_back(std::move(all));
}

void check_options(const EvaluationOptions& options) {
  if (options.n_bins == 0) fail(ErrorKind::invalid_argument, "bins must be >= 1");
  if (!(options.epsilon >= 0.0)) fail(ErrorKind::invalid_argument, "epsilon must be >= 0");
  validate_tau_grid(options.tau_grid);
}

}  // namespace

EvaluationResult evaluate(const DatasetManifest& manifest, const EvaluationOptions& options) {
  check_options(options);
  EvaluationResult result;
  result.dataset_name = manifest.dataset_name;
  result.options = options;

  std::vector<std::string> prep_failures;
  const DerivationContext ctx = prepare_derivation(manifest, &prep_failures);

  struct Task {
    std::size_t method;
    const SubjectEntry* subject;
  };
  std::vector<Task> tasks;
  for (const std::string& name : manifest.method_names()) {
    MethodSummary m;
    m.method = name;
    m.kind = manifest.kind_of(name);
    result.methods.push_back(std::move(m));
    for (const auto& s : manifest.subjects) {
      if (s.methods.count(name)) tasks.push_back({result.methods.size() - 1, &s});
    }
  }

  std::vector<SubjectResult> outcomes(tasks.size());
  parallel_for(tasks.size(), options.workers, [&](std::size_t i) {
    const Task& t = tasks[i];
    outcomes[i] = evaluate_subject(manifest, *t.subject, result.methods[t.method].method, ctx, options);
  });

  for (std::size_t i = 0; i < tasks.size(); ++i) {
    MethodSummary& m = result.methods[tasks[i].method];
    if (!outcomes[i].ok) result.failures.push_back(m.method + "/" + outcomes[i].subject_id + ": " + outcomes[i].error);
    m.subjects.push_back(std::move(outcomes[i]));
  }
  for (auto& m : result.methods) summarize(m, options, result.rows);
  return result;
}

EvaluationResult evaluate(const std::filesystem::path& manifest_path, const EvaluationOptions& options) {
  ManifestOptions mo;
  mo.eager_validation = options.eager_validation;
  return evaluate(load_manifest(manifest_path, mo), options);
}

ReliabilityBins reliability_bins(const DatasetManifest& manifest, const std::string& method,
                                 const std::optional<std::string>& subject_id,
                                 const EvaluationOptions& options) {
  check_options(options);
  const MethodKind kind = manifest.kind_of(method);
  const DerivationContext ctx = kind == MethodKind::aleatoric ? prepare_derivation(manifest) : DerivationContext{};

  ReliabilityBins bins(options.n_bins);
  bool found = false;
  for (const auto& s : manifest.subjects) {
    if (subject_id && s.subject_id != *subject_id) continue;
    if (!s.methods.count(method)) {
      if (subject_id) fail(ErrorKind::invalid_argument, "subject '" + s.subject_id + "' has no method '" + method + "'");
      continue;
    }
    found = true;
    const SubjectInputs in = load_subject(manifest, s, method, ctx, options);
    bins += bin_predictions(in.outputs.confidence, in.ground_truth, options.n_bins, in.mask ? &*in.mask : nullptr);
  }
  if (!found) {
    fail(ErrorKind::invalid_argument,
         subject_id ? "no subject '" + *subject_id + "' in manifest" : "method '" + method + "' has no subjects");
  }
  return bins;
}

}  // namespace suq
