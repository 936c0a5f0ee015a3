#ifndef SUQ_TYPES_HPP
#define SUQ_TYPES_HPP

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace suq {

/// Spatial extents, slowest axis first.
using Dims = std::vector<std::size_t>;

std::size_t voxel_count(const Dims& dims);
std::string dims_to_string(const Dims& dims);

/// Flat per-voxel storage in row-major voxel order.
template <typename Scalar>
using VoxelArray = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

using LabelArray = VoxelArray<std::uint8_t>;

/// Per-voxel foreground probability p1 of a binary segmentation.
template <typename Scalar>
struct ProbMapT {
  Dims dims;
  VoxelArray<Scalar> values;
};

/// Per-voxel uncertainty q in [0,1].
template <typename Scalar>
struct UncertaintyMapT {
  Dims dims;
  VoxelArray<Scalar> values;
};

using ProbMap = ProbMapT<double>;
using UncertaintyMap = UncertaintyMapT<double>;

/// Unnormalized nonnegative field (variance, raw auxiliary output).
struct RawField {
  Dims dims;
  VoxelArray<double> values;
};

/// Binary voxel labels, values in {0,1}.
struct LabelMap {
  Dims dims;
  LabelArray values;
};

/// Row t holds sample t over all voxels (leading sample axis of the stored tensor).
template <typename Scalar>
struct SampleStackT {
  Dims dims;  // spatial dims, without the sample axis
  Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> samples;

  std::size_t n_samples() const { return static_cast<std::size_t>(samples.rows()); }
};

using SampleStack = SampleStackT<float>;

enum class ErrorKind {
  io,
  malformed_header,
  size_mismatch,
  non_finite,
  invalid_label,
  invalid_value,
  dim_mismatch,
  manifest,
  duplicate_subject,
  kind_inconsistency,
  missing_file,
  missing_statistics,
  invalid_argument,
};

const char* to_string(ErrorKind kind);

/// Every failure raised by the toolkit carries a machine-readable kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Throws ErrorKind::dim_mismatch unless both dims agree.
void require_same_dims(const Dims& a, const Dims& b, const char* context);

}  // namespace suq

#endif  // SUQ_TYPES_HPP
