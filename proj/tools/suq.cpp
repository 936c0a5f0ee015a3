// suq: evaluate segmentation uncertainty from a dataset manifest.
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "suq/evaluate.hpp"
#include "suq/report.hpp"
#include "suq/synth.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Exit codes: 0 success, 1 some subject failed, 2 usage or fatal error.
constexpr int kExitSubjectFailure = 1;
constexpr int kExitFatal = 2;

struct EvaluateArgs {
  std::string manifest;
  std::string out;
  std::string config;
  std::optional<std::size_t> bins;
  std::optional<std::string> tau_grid;
  std::optional<double> epsilon;
  bool mask = false;
  std::optional<std::size_t> workers;
  bool lazy = false;
};

std::vector<double> tau_grid_from_json(const json& j) {
  if (j.is_string()) return suq::parse_tau_grid(j.get<std::string>());
  if (j.is_array()) return j.get<std::vector<double>>();
  throw suq::Error(suq::ErrorKind::invalid_argument, "tau_grid must be a string or an array of numbers");
}

// Config file values first, then explicit flags on top.
suq::EvaluationOptions resolve_options(const EvaluateArgs& a) {
  suq::EvaluationOptions opts;
  if (!a.config.empty()) {
    std::ifstream in(a.config);
    if (!in) throw suq::Error(suq::ErrorKind::io, "cannot open config " + a.config);
    json j;
    try {
      j = json::parse(in);
    } catch (const json::exception& e) {
      throw suq::Error(suq::ErrorKind::invalid_argument, a.config + ": " + e.what());
    }
    if (!j.is_object()) throw suq::Error(suq::ErrorKind::invalid_argument, a.config + ": expected a JSON object");
    for (const auto& [key, value] : j.items()) {
      try {
        if (key == "bins") opts.n_bins = value.get<std::size_t>();
        else if (key == "tau_grid") opts.tau_grid = tau_grid_from_json(value);
        else if (key == "epsilon") opts.epsilon = value.get<double>();
        else if (key == "mask") opts.use_mask = value.get<bool>();
        else if (key == "workers") opts.workers = value.get<std::size_t>();
        else if (key == "lazy") opts.eager_validation = !value.get<bool>();
        else throw suq::Error(suq::ErrorKind::invalid_argument, "unknown config key '" + key + "'");
      } catch (const json::exception& e) {
        throw suq::Error(suq::ErrorKind::invalid_argument, a.config + ": key '" + key + "': " + e.what());
      }
    }
  }
  if (a.bins) opts.n_bins = *a.bins;
  if (a.tau_grid) opts.tau_grid = suq::parse_tau_grid(*a.tau_grid);
  if (a.epsilon) opts.epsilon = *a.epsilon;
  if (a.mask) opts.use_mask = true;
  if (a.workers) opts.workers = *a.workers;
  if (a.lazy) opts.eager_validation = false;
  if (opts.workers == 0) opts.workers = std::max(1u, std::thread::hardware_concurrency());
  return opts;
}

int run_evaluate(const EvaluateArgs& a) {
  const suq::EvaluationOptions opts = resolve_options(a);
  const suq::EvaluationResult result = suq::evaluate(fs::path(a.manifest), opts);
  suq::emit_reports(result, a.out);
  std::cout << suq::format_rank_table(suq::rank_methods(result.rows, result.dataset_name));
  for (const auto& f : result.failures) std::cerr << "skipped " << f << "\n";
  if (result.any_failed()) {
    std::cerr << result.failures.size() << " subject evaluation(s) failed\n";
    return kExitSubjectFailure;
  }
  return 0;
}

int run_rank(const std::string& dir) {
  const fs::path path = fs::path(dir) / "metrics.csv";
  std::ifstream in(path);
  if (!in) throw suq::Error(suq::ErrorKind::io, "cannot open " + path.string());
  const auto rows = suq::read_metrics_csv(in);
  std::cout << suq::format_rank_table(suq::rank_methods(rows));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Voxel-wise uncertainty evaluation for segmentation outputs"};
  app.require_subcommand(1);

  EvaluateArgs eval;
  auto* evaluate = app.add_subcommand("evaluate", "Compute metrics for every method in a manifest");
  evaluate->add_option("manifest", eval.manifest, "Dataset manifest JSON")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--out", eval.out, "Output directory")->required();
  evaluate->add_option("--config", eval.config, "JSON file with defaults for the options below")->check(CLI::ExistingFile);
  evaluate->add_option("--bins", eval.bins, "Reliability bins (default 10)");
  evaluate->add_option("--tau-grid", eval.tau_grid, "Thresholds as a:b:step or a comma list");
  evaluate->add_option("--epsilon", eval.epsilon, "Calibration class tolerance (default 0.02)");
  evaluate->add_flag("--mask", eval.mask, "Restrict metrics to subject masks");
  evaluate->add_option("--workers", eval.workers, "Worker threads, 0 for all cores (default 1)");
  evaluate->add_flag("--lazy", eval.lazy, "Validate tensor headers per subject instead of up front");

  std::string synth_config, synth_out;
  auto* synth = app.add_subcommand("synth", "Write a synthetic dataset with known calibration");
  synth->add_option("config", synth_config, "Synthetic dataset config JSON")->required()->check(CLI::ExistingFile);
  synth->add_option("--out", synth_out, "Output directory")->required();

  std::string diag_manifest, diag_method;
  std::optional<std::string> diag_subject;
  std::size_t diag_bins = suq::kDefaultBins;
  bool diag_mask = false;
  auto* diagram = app.add_subcommand("diagram", "Print reliability-diagram CSV for one method");
  diagram->add_option("manifest", diag_manifest, "Dataset manifest JSON")->required()->check(CLI::ExistingFile);
  diagram->add_option("--method", diag_method, "Method name")->required();
  diagram->add_option("--subject", diag_subject, "Subject id; all subjects pooled when omitted");
  diagram->add_option("--bins", diag_bins, "Reliability bins (default 10)");
  diagram->add_flag("--mask", diag_mask, "Restrict to the subject mask");

  std::string rank_dir;
  auto* rank = app.add_subcommand("rank", "Print the rank table of an evaluate output directory");
  rank->add_option("results", rank_dir, "Directory written by evaluate")->required()->check(CLI::ExistingDirectory);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*evaluate) return run_evaluate(eval);
    if (*synth) {
      const fs::path manifest = suq::write_synthetic_dataset(suq::load_synth_config(synth_config), synth_out);
      std::cout << manifest.string() << "\n";
      return 0;
    }
    if (*diagram) {
      suq::EvaluationOptions opts;
      opts.n_bins = diag_bins;
      opts.use_mask = diag_mask;
      const auto manifest = suq::load_manifest(diag_manifest);
      suq::write_diagram_csv(suq::reliability_bins(manifest, diag_method, diag_subject, opts), std::cout);
      return 0;
    }
    if (*rank) return run_rank(rank_dir);
  } catch (const suq::Error& e) {
    std::cerr << "error [" << suq::to_string(e.kind()) << "]: " << e.what() << "\n";
    return kExitFatal;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFatal;
  }
  return kExitFatal;
}
