#include "suq/types.hpp"

#include <functional>
#include <numeric>

namespace suq {

std::size_t voxel_count(const Dims& dims) {
  if (dims.empty()) return 0;
  return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>());
}

std::string dims_to_string(const Dims& dims) {
  std::string out = "[";
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(dims[i]);
  }
  return out + "]";
}

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::io: return "io";
    case ErrorKind::malformed_header: return "malformed_header";
    case ErrorKind::size_mismatch: return "size_mismatch";
    case ErrorKind::non_finite: return "non_finite";
    case ErrorKind::invalid_label: return "invalid_label";
    case ErrorKind::invalid_value: return "invalid_value";
    case ErrorKind::dim_mismatch: return "dim_mismatch";
    case ErrorKind::manifest: return "manifest";
    case ErrorKind::duplicate_subject: return "duplicate_subject";
    case ErrorKind::kind_inconsistency: return "kind_inconsistency";
    case ErrorKind::missing_file: return "missing_file";
    case ErrorKind::missing_statistics: return "missing_statistics";
    case ErrorKind::invalid_argument: return "invalid_argument";
  }
  return "unknown";
}

void require_same_dims(const Dims& a, const Dims& b, const char* context) {
  if (a != b) {
    throw Error(ErrorKind::dim_mismatch, std::string(context) + ": dims " + dims_to_string(a) +
                                             " vs " + dims_to_string(b));
  }
}

}  // namespace suq
