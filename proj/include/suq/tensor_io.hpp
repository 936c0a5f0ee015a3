#ifndef SUQ_TENSOR_IO_HPP
#define SUQ_TENSOR_IO_HPP

// Binary tensor files ("SUQT"):
//
//   offset  size        field
//   0       4           magic "SUQT"
//   4       1           version, 0x01
//   5       1           element kind, 0x01 = float32, 0x02 = uint8
//   6       1           ndim (>= 1)
//   7       4 * ndim    extents, u32 little-endian, slowest axis first
//   ...                 payload, little-endian, row-major (last axis fastest)
//
// The file ends exactly at the end of the payload.

#include <cstdint>
#include <filesystem>
#include <span>
#include <variant>
#include <vector>

#include "suq/types.hpp"

namespace suq {

enum class ElementKind : std::uint8_t { float32 = 0x01, uint8 = 0x02 };

inline constexpr std::uint8_t kTensorVersion = 0x01;

inline constexpr std::size_t tensor_header_size(std::size_t ndim) { return 7 + 4 * ndim; }

inline constexpr std::size_t element_size(ElementKind kind) {
  return kind == ElementKind::float32 ? 4 : 1;
}

class Tensor {
 public:
  Tensor() = default;
  Tensor(Dims dims, VoxelArray<float> values);
  Tensor(Dims dims, LabelArray values);

  const Dims& dims() const { return dims_; }
  ElementKind kind() const;
  std::size_t size() const { return voxel_count(dims_); }

  /// Throws ErrorKind::invalid_argument when the element kind differs.
  const VoxelArray<float>& floats() const;
  const LabelArray& labels() const;

  bool operator==(const Tensor& other) const;

 private:
  Dims dims_;
  std::variant<VoxelArray<float>, LabelArray> data_;
};

struct TensorHeader {
  ElementKind kind = ElementKind::float32;
  Dims dims;

  std::size_t header_bytes() const { return tensor_header_size(dims.size()); }
  std::size_t payload_bytes() const { return voxel_count(dims) * element_size(kind); }
};

std::vector<std::uint8_t> encode_tensor(const Tensor& tensor);
Tensor decode_tensor(std::span<const std::uint8_t> bytes);

Tensor read_tensor(const std::filesystem::path& path);
void write_tensor(const Tensor& tensor, const std::filesystem::path& path);

/// Parses and validates only the header; also checks the file length.
TensorHeader read_tensor_header(const std::filesystem::path& path);

/// Reads a float32 tensor with a leading sample axis straight into stack storage.
SampleStack read_sample_stack(const std::filesystem::path& path);
void write_sample_stack(const SampleStack& stack, const std::filesystem::path& path);

// Typed views. Each validates the value domain of its role.
ProbMap to_prob_map(const Tensor& tensor);
LabelMap to_label_map(const Tensor& tensor);
/// Nonnegative raw field (variance or unnormalized uncertainty).
RawField to_raw_field(const Tensor& tensor);
void validate_probabilities(const SampleStack& stack);

Tensor make_tensor(const ProbMap& prob);
Tensor make_tensor(const LabelMap& labels);
Tensor make_tensor(const RawField& field);
Tensor make_tensor(const SampleStack& stack);

}  // namespace suq

#endif  // SUQ_TENSOR_IO_HPP
