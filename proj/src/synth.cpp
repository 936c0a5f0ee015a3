#include "suq/synth.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "suq/tensor_io.hpp"
#include "suq/uncertainty.hpp"

namespace suq {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

[[noreturn]] void fail(ErrorKind kind, const std::string& msg) { throw Error(kind, msg); }

enum Stream : std::uint64_t { kBaseStream = 1, kLabelStream = 2, kStackStream = 1ull << 32 };

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

// Foreground: centered box covering `prior` of the volume (Chebyshev ball).
LabelArray foreground_region(const Dims& dims, double prior) {
  const std::size_t n = voxel_count(dims);
  const double half_width = std::pow(prior, 1.0 / static_cast<double>(dims.size()));
  LabelArray region(static_cast<Eigen::Index>(n));
  std::vector<std::size_t> coord(dims.size(), 0);
  for (std::size_t v = 0; v < n; ++v) {
    bool inside = true;
    for (std::size_t a = 0; a < dims.size() && inside; ++a) {
      const double u = std::abs((static_cast<double>(coord[a]) + 0.5) / static_cast<double>(dims[a]) - 0.5) * 2.0;
      inside = u <= half_width;
    }
    region(static_cast<Eigen::Index>(v)) = inside ? 1 : 0;
    for (std::size_t a = dims.size(); a-- > 0;) {
      if (++coord[a] < dims[a]) break;
      coord[a] = 0;
    }
  }
  return region;
}

CalibrationCurve parse_curve(const json& j) {
  if (!j.is_object() || !j.contains("type")) fail(ErrorKind::invalid_argument, "curve needs a 'type'");
  const std::string type = j["type"].get<std::string>();
  if (type == "identity") return CalibrationCurve::identity();
  if (type == "shift") return CalibrationCurve::shift(j.at("delta").get<double>());
  if (type == "power") return CalibrationCurve::power(j.at("gamma").get<double>());
  fail(ErrorKind::invalid_argument, "unknown curve type '" + type + "'");
}

std::string file_stem(const std::string& name) {
  std::string out = name;
  for (char& c : out) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '+' || c == '.')) c = '_';
  }
  return out;
}

}  // namespace

double counter_uniform(std::uint64_t seed, std::uint64_t stream, std::uint64_t subject, std::uint64_t index) {
  std::uint64_t h = splitmix(seed);
  h = splitmix(h ^ stream);
  h = splitmix(h ^ subject);
  h = splitmix(h ^ index);
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

double CalibrationCurve::apply(double p) const {
  switch (kind) {
    case CurveKind::identity: return clamp01(p);
    case CurveKind::shift: return clamp01(p + parameter);
    case CurveKind::power: return clamp01(std::pow(clamp01(p), parameter));
  }
  return p;
}

double CalibrationCurve::invert(double p) const {
  switch (kind) {
    case CurveKind::identity: return clamp01(p);
    case CurveKind::shift: return clamp01(p - parameter);
    case CurveKind::power: return clamp01(std::pow(clamp01(p), 1.0 / parameter));
  }
  return p;
}

void SynthConfig::validate() const {
  if (dims.empty() || voxel_count(dims) == 0) fail(ErrorKind::invalid_argument, "synthetic dims must be positive");
  if (!(foreground_prior > 0.0 && foreground_prior < 1.0))
    fail(ErrorKind::invalid_argument, "foreground_prior must lie in (0,1)");
  if (curve.kind == CurveKind::power && !(curve.parameter > 0.0))
    fail(ErrorKind::invalid_argument, "power curve needs gamma > 0");
  if (curve.kind == CurveKind::shift && !(std::abs(curve.parameter) <= 1.0))
    fail(ErrorKind::invalid_argument, "shift must lie in [-1,1]");
  if (n_samples == 0) fail(ErrorKind::invalid_argument, "n_samples must be >= 1");
  if (!(jitter >= 0.0)) fail(ErrorKind::invalid_argument, "jitter must be >= 0");
  if (!(prob_low >= 0.0 && prob_low <= 0.5 && prob_high >= 0.5 && prob_high <= 1.0))
    fail(ErrorKind::invalid_argument, "need 0 <= prob_low <= 0.5 <= prob_high <= 1");
}

SynthSubject generate_subject(const SynthConfig& config) {
  config.validate();
  const std::size_t n = voxel_count(config.dims);
  const LabelArray region = foreground_region(config.dims, config.foreground_prior);

  SynthSubject s;
  s.prob.dims = s.true_prob.dims = s.ground_truth.dims = config.dims;
  s.prob.values.resize(static_cast<Eigen::Index>(n));
  s.true_prob.values.resize(static_cast<Eigen::Index>(n));
  s.ground_truth.values.resize(static_cast<Eigen::Index>(n));

  for (std::size_t v = 0; v < n; ++v) {
    const auto i = static_cast<Eigen::Index>(v);
    const double u = counter_uniform(config.seed, kBaseStream, config.field_index, v);
    const double base = region(i) ? 0.5 + u * (config.prob_high - 0.5) : config.prob_low + u * (0.5 - config.prob_low);
    double truth = 0.0;
    double reported = 0.0;
    if (config.anchor == ProbabilityAnchor::true_probability) {
      truth = base;
      reported = config.curve.apply(base);
    } else {
      reported = base;
      truth = config.curve.invert(base);
    }
    s.true_prob.values(i) = truth;
    s.prob.values(i) = reported;
    s.ground_truth.values(i) =
        counter_uniform(config.seed, kLabelStream, config.subject_index, v) < truth ? 1 : 0;
  }
  return s;
}

SampleStack generate_sample_stack(const SynthConfig& config, const ProbMap& base, std::uint64_t stream_offset) {
  config.validate();
  const auto voxels = base.values.size();
  SampleStack stack;
  stack.dims = base.dims;
  stack.samples.resize(static_cast<Eigen::Index>(config.n_samples), voxels);
  for (std::size_t t = 0; t < config.n_samples; ++t) {
    const std::uint64_t stream = kStackStream * (stream_offset + 1) + t;
    for (Eigen::Index v = 0; v < voxels; ++v) {
      const double noise = 2.0 * counter_uniform(config.seed, stream, config.subject_index,
                                                 static_cast<std::uint64_t>(v)) - 1.0;
      stack.samples(static_cast<Eigen::Index>(t), v) =
          static_cast<float>(clamp01(base.values(v) + config.jitter * noise));
    }
  }
  return stack;
}

SampleStack generate_sample_stack(const SynthConfig& config) {
  return generate_sample_stack(config, generate_subject(config).prob);
}

std::pair<SynthSubject, SynthSubject> generate_masking_pair(double delta, SynthConfig base) {
  if (!(delta > 0.0 && delta <= 0.3)) fail(ErrorKind::invalid_argument, "masking pair needs delta in (0, 0.3]");
  base.anchor = ProbabilityAnchor::reported_probability;

  SynthConfig a = base;
  a.curve = CalibrationCurve::shift(delta);
  a.subject_index = 0;
  SynthConfig b = base;
  b.curve = CalibrationCurve::shift(-delta);
  b.subject_index = 1;
  return {generate_subject(a), generate_subject(b)};
}

SynthDatasetConfig parse_synth_config(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::invalid_argument, std::string("synth config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) fail(ErrorKind::invalid_argument, "synth config root must be an object");

  static const std::set<std::string> known = {
      "dataset_name", "n_subjects", "dims",  "foreground_prior", "curve",   "curves",     "n_samples",
      "n_models",     "jitter",     "prob_low", "prob_high",     "anchor",  "seed",       "methods",
      "write_mask"};
  for (const auto& [key, value] : doc.items()) {
    if (!known.count(key)) fail(ErrorKind::invalid_argument, "unknown synth config key '" + key + "'");
  }

  SynthDatasetConfig c;
  try {
    c.dataset_name = doc.value("dataset_name", c.dataset_name);
    c.n_subjects = doc.value("n_subjects", c.n_subjects);
    if (doc.contains("dims")) c.subject.dims = doc["dims"].get<Dims>();
    c.subject.foreground_prior = doc.value("foreground_prior", c.subject.foreground_prior);
    if (doc.contains("curve")) c.subject.curve = parse_curve(doc["curve"]);
    if (doc.contains("curves")) {
      for (const auto& j : doc["curves"]) c.curves.push_back(parse_curve(j));
    }
    c.subject.n_samples = doc.value("n_samples", c.subject.n_samples);
    c.n_models = doc.value("n_models", c.n_models);
    c.subject.jitter = doc.value("jitter", c.subject.jitter);
    c.subject.prob_low = doc.value("prob_low", c.subject.prob_low);
    c.subject.prob_high = doc.value("prob_high", c.subject.prob_high);
    if (doc.contains("anchor")) {
      const std::string anchor = doc["anchor"].get<std::string>();
      if (anchor == "true") c.subject.anchor = ProbabilityAnchor::true_probability;
      else if (anchor == "reported") c.subject.anchor = ProbabilityAnchor::reported_probability;
      else fail(ErrorKind::invalid_argument, "anchor must be 'true' or 'reported'");
    }
    c.subject.seed = doc.value("seed", c.subject.seed);
    if (doc.contains("methods")) c.methods = doc["methods"].get<std::vector<std::string>>();
    c.write_mask = doc.value("write_mask", c.write_mask);
  } catch (const json::exception& e) {
    fail(ErrorKind::invalid_argument, std::string("synth config: ") + e.what());
  }
  if (c.n_subjects == 0) fail(ErrorKind::invalid_argument, "n_subjects must be >= 1");
  if (c.n_models == 0) fail(ErrorKind::invalid_argument, "n_models must be >= 1");
  if (c.methods.empty()) fail(ErrorKind::invalid_argument, "no methods requested");
  c.subject.validate();
  return c;
}

SynthDatasetConfig load_synth_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::io, "cannot open synth config " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_synth_config(buffer.str());
}

fs::path write_synthetic_dataset(const SynthDatasetConfig& config, const fs::path& out_dir) {
  static const std::set<std::string> supported = {"baseline", "baseline+MC", "ensemble", "aleatoric", "auxiliary"};
  for (const auto& m : config.methods) {
    if (!supported.count(m)) fail(ErrorKind::invalid_argument, "synth cannot emit method '" + m + "'");
  }
  fs::create_directories(out_dir);

  DatasetManifest manifest;
  manifest.dataset_name = config.dataset_name;
  manifest.declared_T = config.subject.n_samples;
  manifest.declared_K = config.n_models;

  const std::size_t width = std::to_string(config.n_subjects - 1).size();
  for (std::size_t i = 0; i < config.n_subjects; ++i) {
    SynthConfig cfg = config.subject;
    cfg.subject_index = i;
    cfg.field_index = i;
    if (!config.curves.empty()) cfg.curve = config.curves[i % config.curves.size()];

    std::string index = std::to_string(i);
    SubjectEntry entry;
    entry.subject_id = "subject_" + std::string(width - index.size(), '0') + index;
    const fs::path dir = out_dir / entry.subject_id;
    fs::create_directories(dir);

    const SynthSubject s = generate_subject(cfg);
    entry.ground_truth = dir / "ground_truth.suqt";
    write_tensor(make_tensor(s.ground_truth), entry.ground_truth);
    if (config.write_mask) {
      const double prior = std::min(0.99, 2.0 * cfg.foreground_prior);
      entry.mask = dir / "mask.suqt";
      write_tensor(make_tensor(LabelMap{cfg.dims, foreground_region(cfg.dims, prior)}), *entry.mask);
    }

    for (const std::string& name : config.methods) {
      const fs::path stem = dir / file_stem(name);
      MethodInput in;
      if (name == "baseline") {
        in.kind = MethodKind::single_prob;
        in.prob = stem.string() + ".suqt";
        write_tensor(make_tensor(s.prob), in.prob);
      } else if (name == "baseline+MC") {
        in.kind = MethodKind::sample_stack;
        in.stack = stem.string() + ".suqt";
        write_sample_stack(generate_sample_stack(cfg, s.prob, 1), in.stack);
      } else if (name == "ensemble") {
        SynthConfig ens = cfg;
        ens.n_samples = config.n_models;
        in.kind = MethodKind::ensemble_stack;
        in.stack = stem.string() + ".suqt";
        write_sample_stack(generate_sample_stack(ens, s.prob, 2), in.stack);
      } else if (name == "aleatoric") {
        in.kind = MethodKind::aleatoric;
        in.prob = stem.string() + "_prob.suqt";
        in.variance = stem.string() + "_variance.suqt";
        write_tensor(make_tensor(s.prob), in.prob);
        write_tensor(make_tensor(RawField{cfg.dims, s.prob.values * (1.0 - s.prob.values)}), in.variance);
      } else {
        in.kind = MethodKind::auxiliary;
        in.labels = stem.string() + "_labels.suqt";
        in.uncertainty = stem.string() + "_uncertainty.suqt";
        write_tensor(make_tensor(threshold_prediction(s.prob)), in.labels);
        write_tensor(make_tensor(RawField{cfg.dims, 3.0 * (1.0 - (2.0 * s.prob.values - 1.0).abs())}),
                     in.uncertainty);
      }
      entry.methods.emplace(name, std::move(in));
    }
    manifest.subjects.push_back(std::move(entry));
  }

  const fs::path manifest_path = out_dir / "manifest.json";
  save_manifest(manifest, manifest_path);
  return manifest_path;
}

}  // namespace suq
