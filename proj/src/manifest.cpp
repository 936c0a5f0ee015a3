#include "suq/manifest.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "suq/tensor_io.hpp"

namespace suq {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

[[noreturn]] void fail(ErrorKind kind, const std::string& msg) { throw Error(kind, msg); }

const json& require(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) fail(ErrorKind::manifest, where + ": missing field '" + key + "'");
  return *it;
}

std::string require_string(const json& obj, const char* key, const std::string& where) {
  const json& v = require(obj, key, where);
  if (!v.is_string()) fail(ErrorKind::manifest, where + ": field '" + key + "' must be a string");
  return v.get<std::string>();
}

std::size_t require_positive(const json& obj, const char* key, const std::string& where) {
  const json& v = require(obj, key, where);
  if (!v.is_number_integer() || v.get<long long>() <= 0)
    fail(ErrorKind::manifest, where + ": field '" + key + "' must be a positive integer");
  return v.get<std::size_t>();
}

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

fs::path existing_file(const fs::path& base, const json& obj, const char* key, const std::string& where) {
  fs::path p = resolve(base, require_string(obj, key, where));
  if (!fs::is_regular_file(p)) fail(ErrorKind::missing_file, where + ": referenced file not found: " + p.string());
  return p;
}

MethodInput parse_method(const json& obj, const fs::path& base, const std::string& where) {
  if (!obj.is_object()) fail(ErrorKind::manifest, where + ": method entry must be an object");
  MethodInput in;
  try {
    in.kind = parse_method_kind(require_string(obj, "kind", where));
  } catch (const Error& e) {
    fail(ErrorKind::manifest, where + ": " + e.what());
  }
  switch (in.kind) {
    case MethodKind::single_prob:
      in.prob = existing_file(base, obj, "prob", where);
      break;
    case MethodKind::sample_stack:
    case MethodKind::ensemble_stack:
      in.stack = existing_file(base, obj, "stack", where);
      break;
    case MethodKind::aleatoric:
      in.prob = existing_file(base, obj, "prob", where);
      in.variance = existing_file(base, obj, "variance", where);
      break;
    case MethodKind::auxiliary:
      in.labels = existing_file(base, obj, "labels", where);
      in.uncertainty = existing_file(base, obj, "uncertainty", where);
      break;
  }
  return in;
}

std::string relative_to(const fs::path& p, const fs::path& base) {
  const fs::path abs_p = fs::absolute(p).lexically_normal();
  const fs::path abs_base = fs::absolute(base).lexically_normal();
  const fs::path rel = abs_p.lexically_relative(abs_base);
  if (rel.empty() || *rel.begin() == "..") return abs_p.generic_string();
  return rel.generic_string();
}

void expect_kind(const TensorHeader& h, ElementKind kind, const fs::path& p, const std::string& where) {
  if (h.kind != kind) {
    fail(ErrorKind::manifest, where + ": " + p.string() + " must be " +
                                  (kind == ElementKind::float32 ? "float32" : "uint8"));
  }
}

}  // namespace

const char* to_string(MethodKind kind) {
  switch (kind) {
    case MethodKind::single_prob: return "single_prob";
    case MethodKind::sample_stack: return "sample_stack";
    case MethodKind::ensemble_stack: return "ensemble_stack";
    case MethodKind::aleatoric: return "aleatoric";
    case MethodKind::auxiliary: return "auxiliary";
  }
  return "unknown";
}

MethodKind parse_method_kind(std::string_view name) {
  for (MethodKind k : {MethodKind::single_prob, MethodKind::sample_stack, MethodKind::ensemble_stack,
                       MethodKind::aleatoric, MethodKind::auxiliary}) {
    if (name == to_string(k)) return k;
  }
  fail(ErrorKind::invalid_argument, "unknown method kind '" + std::string(name) + "'");
}

std::vector<fs::path> MethodInput::paths() const {
  switch (kind) {
    case MethodKind::single_prob: return {prob};
    case MethodKind::sample_stack:
    case MethodKind::ensemble_stack: return {stack};
    case MethodKind::aleatoric: return {prob, variance};
    case MethodKind::auxiliary: return {labels, uncertainty};
  }
  return {};
}

std::vector<std::string> DatasetManifest::method_names() const {
  std::set<std::string> names;
  for (const auto& s : subjects)
    for (const auto& [name, input] : s.methods) names.insert(name);
  return {names.begin(), names.end()};
}

MethodKind DatasetManifest::kind_of(const std::string& method) const {
  for (const auto& s : subjects) {
    auto it = s.methods.find(method);
    if (it != s.methods.end()) return it->second.kind;
  }
  fail(ErrorKind::invalid_argument, "method '" + method + "' not in manifest");
}

void validate_subject(const DatasetManifest& manifest, const SubjectEntry& subject,
                      const std::optional<std::string>& only_method) {
  const std::string where = "subject '" + subject.subject_id + "'";
  const TensorHeader gt = read_tensor_header(subject.ground_truth);
  expect_kind(gt, ElementKind::uint8, subject.ground_truth, where);

  auto same_dims = [&](const Dims& dims, const fs::path& p) {
    if (dims != gt.dims) {
      fail(ErrorKind::dim_mismatch, where + ": " + p.string() + " has dims " + dims_to_string(dims) +
                                        ", ground truth has " + dims_to_string(gt.dims));
    }
  };

  if (subject.mask) {
    const TensorHeader m = read_tensor_header(*subject.mask);
    expect_kind(m, ElementKind::uint8, *subject.mask, where);
    same_dims(m.dims, *subject.mask);
  }

  for (const auto& [name, input] : subject.methods) {
    if (only_method && name != *only_method) continue;
    const std::string mwhere = where + " method '" + name + "'";
    if (input.kind == MethodKind::sample_stack || input.kind == MethodKind::ensemble_stack) {
      const TensorHeader h = read_tensor_header(input.stack);
      expect_kind(h, ElementKind::float32, input.stack, mwhere);
      if (h.dims.size() < 2) fail(ErrorKind::dim_mismatch, mwhere + ": stack needs a leading sample axis");
      const std::size_t declared =
          input.kind == MethodKind::sample_stack ? manifest.declared_T : manifest.declared_K;
      if (h.dims.front() != declared) {
        fail(ErrorKind::dim_mismatch, mwhere + ": stack has " + std::to_string(h.dims.front()) +
                                          " samples, manifest declares " + std::to_string(declared));
      }
      same_dims(Dims(h.dims.begin() + 1, h.dims.end()), input.stack);
      continue;
    }
    for (const fs::path& p : input.paths()) {
      const TensorHeader h = read_tensor_header(p);
      const bool label_file = input.kind == MethodKind::auxiliary && p == input.labels;
      expect_kind(h, label_file ? ElementKind::uint8 : ElementKind::float32, p, mwhere);
      same_dims(h.dims, p);
    }
  }
}

DatasetManifest parse_manifest(std::string_view json_text, const fs::path& base_dir,
                               const ManifestOptions& options) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::manifest, std::string("manifest is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) fail(ErrorKind::manifest, "manifest root must be an object");

  DatasetManifest m;
  m.dataset_name = require_string(doc, "dataset_name", "manifest");
  m.declared_T = require_positive(doc, "declared_T", "manifest");
  m.declared_K = require_positive(doc, "declared_K", "manifest");

  const json& subjects = require(doc, "subjects", "manifest");
  if (!subjects.is_array() || subjects.empty())
    fail(ErrorKind::manifest, "manifest: 'subjects' must be a non-empty array");

  std::set<std::string> seen_ids;
  std::map<std::string, MethodKind> kinds;
  for (std::size_t i = 0; i < subjects.size(); ++i) {
    const json& s = subjects[i];
    std::string where = "subjects[" + std::to_string(i) + "]";
    if (!s.is_object()) fail(ErrorKind::manifest, where + " must be an object");

    SubjectEntry entry;
    entry.subject_id = require_string(s, "subject_id", where);
    if (entry.subject_id.empty()) fail(ErrorKind::manifest, where + ": empty subject_id");
    if (!seen_ids.insert(entry.subject_id).second)
      fail(ErrorKind::duplicate_subject, "duplicate subject_id '" + entry.subject_id + "'");
    where = "subject '" + entry.subject_id + "'";

    entry.ground_truth = existing_file(base_dir, s, "ground_truth", where);
    if (s.contains("mask") && !s["mask"].is_null()) entry.mask = existing_file(base_dir, s, "mask", where);

    const json& methods = require(s, "methods", where);
    if (!methods.is_object()) fail(ErrorKind::manifest, where + ": 'methods' must be an object");
    for (const auto& [name, obj] : methods.items()) {
      MethodInput input = parse_method(obj, base_dir, where + " method '" + name + "'");
      auto [it, inserted] = kinds.emplace(name, input.kind);
      if (!inserted && it->second != input.kind) {
        fail(ErrorKind::kind_inconsistency, "method '" + name + "' is " + to_string(it->second) +
                                                " in one subject and " + to_string(input.kind) + " in " +
                                                where);
      }
      entry.methods.emplace(name, std::move(input));
    }
    m.subjects.push_back(std::move(entry));
  }

  if (options.eager_validation) {
    for (const auto& s : m.subjects) validate_subject(m, s);
  }
  return m;
}

DatasetManifest load_manifest(const fs::path& path, const ManifestOptions& options) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::missing_file, "cannot open manifest " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_manifest(buffer.str(), path.parent_path(), options);
}

void save_manifest(const DatasetManifest& manifest, const fs::path& path) {
  const fs::path base = path.parent_path().empty() ? fs::path(".") : path.parent_path();
  json doc;
  doc["dataset_name"] = manifest.dataset_name;
  doc["declared_T"] = manifest.declared_T;
  doc["declared_K"] = manifest.declared_K;
  doc["subjects"] = json::array();
  for (const auto& s : manifest.subjects) {
    json entry;
    entry["subject_id"] = s.subject_id;
    entry["ground_truth"] = relative_to(s.ground_truth, base);
    if (s.mask) entry["mask"] = relative_to(*s.mask, base);
    json methods = json::object();
    for (const auto& [name, in] : s.methods) {
      json m;
      m["kind"] = to_string(in.kind);
      switch (in.kind) {
        case MethodKind::single_prob: m["prob"] = relative_to(in.prob, base); break;
        case MethodKind::sample_stack:
        case MethodKind::ensemble_stack: m["stack"] = relative_to(in.stack, base); break;
        case MethodKind::aleatoric:
          m["prob"] = relative_to(in.prob, base);
          m["variance"] = relative_to(in.variance, base);
          break;
        case MethodKind::auxiliary:
          m["labels"] = relative_to(in.labels, base);
          m["uncertainty"] = relative_to(in.uncertainty, base);
          break;
      }
      methods[name] = std::move(m);
    }
    entry["methods"] = std::move(methods);
    doc["subjects"].push_back(std::move(entry));
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorKind::io, "cannot write manifest " + path.string());
  out << doc.dump(2) << '\n';
  if (!out) fail(ErrorKind::io, "write failure on " + path.string());
}

}  // namespace suq
