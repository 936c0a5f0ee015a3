#ifndef SUQ_MANIFEST_HPP
#define SUQ_MANIFEST_HPP

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "suq/types.hpp"

namespace suq {

enum class MethodKind { single_prob, sample_stack, ensemble_stack, aleatoric, auxiliary };

const char* to_string(MethodKind kind);
MethodKind parse_method_kind(std::string_view name);

/// Input artifacts of one method for one subject. Only the paths of the
/// method's kind are set:
///   single_prob     prob
///   sample_stack    stack (leading extent == declared_T)
///   ensemble_stack  stack (leading extent == declared_K)
///   aleatoric       prob + variance
///   auxiliary       labels + uncertainty
struct MethodInput {
  MethodKind kind = MethodKind::single_prob;
  std::filesystem::path prob;
  std::filesystem::path stack;
  std::filesystem::path variance;
  std::filesystem::path labels;
  std::filesystem::path uncertainty;

  std::vector<std::filesystem::path> paths() const;
};

struct SubjectEntry {
  std::string subject_id;
  std::filesystem::path ground_truth;
  std::optional<std::filesystem::path> mask;
  std::map<std::string, MethodInput> methods;
};

struct DatasetManifest {
  std::string dataset_name;
  std::vector<SubjectEntry> subjects;
  std::size_t declared_T = 20;
  std::size_t declared_K = 10;

  /// Sorted union of method names over all subjects.
  std::vector<std::string> method_names() const;
  MethodKind kind_of(const std::string& method) const;
};

struct ManifestOptions {
  /// Check tensor headers (dims, stack extents) at load time. When false the
  /// same checks run through validate_subject on first use.
  bool eager_validation = true;
};

/// Relative paths inside the document resolve against `base_dir`.
DatasetManifest parse_manifest(std::string_view json_text, const std::filesystem::path& base_dir,
                               const ManifestOptions& options = {});
DatasetManifest load_manifest(const std::filesystem::path& path, const ManifestOptions& options = {});

/// Header-level checks for one subject: shared spatial dims, label/float kinds,
/// stack extents against declared T/K. With `only_method`, the other methods'
/// files are not checked.
void validate_subject(const DatasetManifest& manifest, const SubjectEntry& subject,
                      const std::optional<std::string>& only_method = std::nullopt);

/// Writes paths relative to the manifest's directory when they lie below it.
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

}  // namespace suq

#endif  // SUQ_MANIFEST_HPP
