#include "suq/tensor_io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

namespace suq {
namespace {

constexpr std::array<std::uint8_t, 4> kMagic = {'S', 'U', 'Q', 'T'};
constexpr std::size_t kFixedHeader = 7;

static_assert(sizeof(float) == 4 && std::numeric_limits<float>::is_iec559);

std::uint32_t load_u32_le(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void store_u32_le(std::uint32_t v, std::uint8_t* p) {
  p[0] = static_cast<std::uint8_t>(v);
  p[1] = static_cast<std::uint8_t>(v >> 8);
  p[2] = static_cast<std::uint8_t>(v >> 16);
  p[3] = static_cast<std::uint8_t>(v >> 24);
}

void swap_float_bytes(float* data, std::size_t n) {
  if constexpr (std::endian::native == std::endian::big) {
    auto* bytes = reinterpret_cast<std::uint8_t*>(data);
    for (std::size_t i = 0; i < n; ++i) std::reverse(bytes + 4 * i, bytes + 4 * i + 4);
  } else {
    (void)data;
    (void)n;
  }
}

[[noreturn]] void fail(ErrorKind kind, const std::string& msg) { throw Error(kind, msg); }

// Parses the fixed part and the extents. `prefix` must hold at least the full header.
TensorHeader parse_header(std::span<const std::uint8_t> prefix) {
  if (prefix.size() < kFixedHeader) fail(ErrorKind::malformed_header, "truncated tensor header");
  if (!std::equal(kMagic.begin(), kMagic.end(), prefix.begin()))
    fail(ErrorKind::malformed_header, "bad magic, not a SUQT tensor");
  if (prefix[4] != kTensorVersion)
    fail(ErrorKind::malformed_header, "unsupported tensor version " + std::to_string(prefix[4]));

  TensorHeader header;
  switch (prefix[5]) {
    case 0x01: header.kind = ElementKind::float32; break;
    case 0x02: header.kind = ElementKind::uint8; break;
    default: fail(ErrorKind::malformed_header, "unknown element kind " + std::to_string(prefix[5]));
  }
  const std::size_t ndim = prefix[6];
  if (ndim == 0) fail(ErrorKind::malformed_header, "tensor with zero dimensions");
  if (prefix.size() < tensor_header_size(ndim))
    fail(ErrorKind::malformed_header, "truncated tensor extents");

  std::size_t total = 1;
  header.dims.reserve(ndim);
  for (std::size_t i = 0; i < ndim; ++i) {
    const std::size_t extent = load_u32_le(prefix.data() + kFixedHeader + 4 * i);
    if (extent == 0) fail(ErrorKind::malformed_header, "zero extent on axis " + std::to_string(i));
    if (total > std::numeric_limits<std::size_t>::max() / 8 / extent)
      fail(ErrorKind::malformed_header, "tensor extents overflow");
    total *= extent;
    header.dims.push_back(extent);
  }
  return header;
}

void validate_floats(const float* data, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(data[i]))
      fail(ErrorKind::non_finite, "non-finite float at element " + std::to_string(i));
  }
}

void validate_labels(const std::uint8_t* data, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    if (data[i] > 1)
      fail(ErrorKind::invalid_label, "label value " + std::to_string(data[i]) + " at element " +
                                         std::to_string(i));
  }
}

void check_dims_for_write(const Dims& dims) {
  if (dims.empty()) fail(ErrorKind::invalid_argument, "cannot write a tensor without dimensions");
  if (dims.size() > 255) fail(ErrorKind::invalid_argument, "more than 255 dimensions");
  for (std::size_t d : dims) {
    if (d == 0 || d > std::numeric_limits<std::uint32_t>::max())
      fail(ErrorKind::invalid_argument, "extent out of range in " + dims_to_string(dims));
  }
}

std::vector<std::uint8_t> encode_header(ElementKind kind, const Dims& dims) {
  check_dims_for_write(dims);
  std::vector<std::uint8_t> out(tensor_header_size(dims.size()));
  std::copy(kMagic.begin(), kMagic.end(), out.begin());
  out[4] = kTensorVersion;
  out[5] = static_cast<std::uint8_t>(kind);
  out[6] = static_cast<std::uint8_t>(dims.size());
  for (std::size_t i = 0; i < dims.size(); ++i)
    store_u32_le(static_cast<std::uint32_t>(dims[i]), out.data() + kFixedHeader + 4 * i);
  return out;
}

struct OpenTensor {
  std::ifstream stream;
  TensorHeader header;
};

OpenTensor open_tensor(const std::filesystem::path& path) {
  OpenTensor t;
  t.stream.open(path, std::ios::binary);
  if (!t.stream) fail(ErrorKind::io, "cannot open tensor file " + path.string());

  t.stream.seekg(0, std::ios::end);
  const auto file_size = static_cast<std::size_t>(t.stream.tellg());
  t.stream.seekg(0, std::ios::beg);

  std::vector<std::uint8_t> prefix(std::min(file_size, tensor_header_size(255)));
  t.stream.read(reinterpret_cast<char*>(prefix.data()), static_cast<std::streamsize>(prefix.size()));
  if (!t.stream) fail(ErrorKind::io, "read failure on " + path.string());

  try {
    t.header = parse_header(prefix);
  } catch (const Error& e) {
    fail(e.kind(), path.string() + ": " + e.what());
  }
  const std::size_t expected = t.header.header_bytes() + t.header.payload_bytes();
  if (file_size != expected) {
    fail(ErrorKind::size_mismatch, path.string() + ": header " + dims_to_string(t.header.dims) +
                                       " implies " + std::to_string(expected) + " bytes, file has " +
                                       std::to_string(file_size));
  }
  t.stream.seekg(static_cast<std::streamoff>(t.header.header_bytes()), std::ios::beg);
  return t;
}

void read_exact(std::ifstream& in, void* dst, std::size_t bytes, const std::filesystem::path& path) {
  in.read(static_cast<char*>(dst), static_cast<std::streamsize>(bytes));
  if (!in || static_cast<std::size_t>(in.gcount()) != bytes)
    fail(ErrorKind::io, "short read on " + path.string());
}

void write_float_file(const Dims& dims, const float* data, const std::filesystem::path& path) {
  const std::vector<std::uint8_t> header = encode_header(ElementKind::float32, dims);
  const std::size_t n = voxel_count(dims);
  validate_floats(data, n);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::io, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(header.data()), static_cast<std::streamsize>(header.size()));
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * 4));
  } else {
    std::vector<float> swapped(data, data + n);
    swap_float_bytes(swapped.data(), n);
    out.write(reinterpret_cast<const char*>(swapped.data()), static_cast<std::streamsize>(n * 4));
  }
  if (!out) fail(ErrorKind::io, "write failure on " + path.string());
}

}  // namespace

Tensor::Tensor(Dims dims, VoxelArray<float> values) : dims_(std::move(dims)), data_(std::move(values)) {
  if (static_cast<std::size_t>(std::get<0>(data_).size()) != voxel_count(dims_))
    fail(ErrorKind::size_mismatch, "float payload does not match " + dims_to_string(dims_));
}

Tensor::Tensor(Dims dims, LabelArray values) : dims_(std::move(dims)), data_(std::move(values)) {
  if (static_cast<std::size_t>(std::get<1>(data_).size()) != voxel_count(dims_))
    fail(ErrorKind::size_mismatch, "label payload does not match " + dims_to_string(dims_));
}

ElementKind Tensor::kind() const {
  return data_.index() == 0 ? ElementKind::float32 : ElementKind::uint8;
}

const VoxelArray<float>& Tensor::floats() const {
  if (const auto* v = std::get_if<VoxelArray<float>>(&data_)) return *v;
  fail(ErrorKind::invalid_argument, "expected a float32 tensor, got uint8");
}

const LabelArray& Tensor::labels() const {
  if (const auto* v = std::get_if<LabelArray>(&data_)) return *v;
  fail(ErrorKind::invalid_argument, "expected a uint8 tensor, got float32");
}

bool Tensor::operator==(const Tensor& other) const {
  if (dims_ != other.dims_ || kind() != other.kind()) return false;
  if (kind() == ElementKind::float32) {
    // bitwise, so that -0.0 and 0.0 are distinct and round trips are byte-exact
    return std::memcmp(floats().data(), other.floats().data(), size() * 4) == 0;
  }
  return (labels() == other.labels()).all();
}

std::vector<std::uint8_t> encode_tensor(const Tensor& tensor) {
  std::vector<std::uint8_t> out = encode_header(tensor.kind(), tensor.dims());
  const std::size_t header = out.size();
  out.resize(header + tensor.size() * element_size(tensor.kind()));
  if (tensor.kind() == ElementKind::float32) {
    validate_floats(tensor.floats().data(), tensor.size());
    std::memcpy(out.data() + header, tensor.floats().data(), tensor.size() * 4);
    swap_float_bytes(reinterpret_cast<float*>(out.data() + header), tensor.size());
  } else {
    validate_labels(tensor.labels().data(), tensor.size());
    std::memcpy(out.data() + header, tensor.labels().data(), tensor.size());
  }
  return out;
}

Tensor decode_tensor(std::span<const std::uint8_t> bytes) {
  const TensorHeader header = parse_header(bytes);
  const std::size_t expected = header.header_bytes() + header.payload_bytes();
  if (bytes.size() != expected) {
    fail(ErrorKind::size_mismatch, "header " + dims_to_string(header.dims) + " implies " +
                                       std::to_string(expected) + " bytes, buffer has " +
                                       std::to_string(bytes.size()));
  }
  const std::size_t n = voxel_count(header.dims);
  const std::uint8_t* payload = bytes.data() + header.header_bytes();
  if (header.kind == ElementKind::float32) {
    VoxelArray<float> values(n);
    std::memcpy(values.data(), payload, n * 4);
    swap_float_bytes(values.data(), n);
    validate_floats(values.data(), n);
    return Tensor(header.dims, std::move(values));
  }
  LabelArray values(n);
  std::memcpy(values.data(), payload, n);
  validate_labels(values.data(), n);
  return Tensor(header.dims, std::move(values));
}

Tensor read_tensor(const std::filesystem::path& path) {
  OpenTensor t = open_tensor(path);
  const std::size_t n = voxel_count(t.header.dims);
  try {
    if (t.header.kind == ElementKind::float32) {
      VoxelArray<float> values(n);
      read_exact(t.stream, values.data(), n * 4, path);
      swap_float_bytes(values.data(), n);
      validate_floats(values.data(), n);
      return Tensor(t.header.dims, std::move(values));
    }
    LabelArray values(n);
    read_exact(t.stream, values.data(), n, path);
    validate_labels(values.data(), n);
    return Tensor(t.header.dims, std::move(values));
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::io) throw;
    fail(e.kind(), path.string() + ": " + e.what());
  }
}

void write_tensor(const Tensor& tensor, const std::filesystem::path& path) {
  if (tensor.kind() == ElementKind::float32) {
    write_float_file(tensor.dims(), tensor.floats().data(), path);
    return;
  }
  validate_labels(tensor.labels().data(), tensor.size());
  const std::vector<std::uint8_t> header = encode_header(ElementKind::uint8, tensor.dims());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::io, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(header.data()), static_cast<std::streamsize>(header.size()));
  out.write(reinterpret_cast<const char*>(tensor.labels().data()), static_cast<std::streamsize>(tensor.size()));
  if (!out) fail(ErrorKind::io, "write failure on " + path.string());
}

void write_sample_stack(const SampleStack& stack, const std::filesystem::path& path) {
  Dims dims{stack.n_samples()};
  dims.insert(dims.end(), stack.dims.begin(), stack.dims.end());
  if (voxel_count(stack.dims) != static_cast<std::size_t>(stack.samples.cols()))
    fail(ErrorKind::size_mismatch, "sample stack columns do not match " + dims_to_string(stack.dims));
  write_float_file(dims, stack.samples.data(), path);
}

TensorHeader read_tensor_header(const std::filesystem::path& path) {
  return open_tensor(path).header;
}

SampleStack read_sample_stack(const std::filesystem::path& path) {
  OpenTensor t = open_tensor(path);
  if (t.header.kind != ElementKind::float32)
    fail(ErrorKind::invalid_argument, path.string() + ": sample stack must be float32");
  if (t.header.dims.size() < 2)
    fail(ErrorKind::dim_mismatch, path.string() + ": sample stack needs a leading sample axis");

  SampleStack stack;
  stack.dims.assign(t.header.dims.begin() + 1, t.header.dims.end());
  const auto rows = static_cast<Eigen::Index>(t.header.dims.front());
  const auto cols = static_cast<Eigen::Index>(voxel_count(stack.dims));
  stack.samples.resize(rows, cols);
  const std::size_t n = static_cast<std::size_t>(rows * cols);
  read_exact(t.stream, stack.samples.data(), n * 4, path);
  swap_float_bytes(stack.samples.data(), n);
  try {
    validate_probabilities(stack);
  } catch (const Error& e) {
    fail(e.kind(), path.string() + ": " + e.what());
  }
  return stack;
}

ProbMap to_prob_map(const Tensor& tensor) {
  const auto& f = tensor.floats();
  if (!((f >= 0.0f) && (f <= 1.0f)).all())
    fail(ErrorKind::invalid_value, "probability outside [0,1]");
  return ProbMap{tensor.dims(), f.cast<double>()};
}

LabelMap to_label_map(const Tensor& tensor) {
  return LabelMap{tensor.dims(), tensor.labels()};
}

RawField to_raw_field(const Tensor& tensor) {
  const auto& f = tensor.floats();
  if ((f < 0.0f).any()) fail(ErrorKind::invalid_value, "negative value in nonnegative field");
  return RawField{tensor.dims(), f.cast<double>()};
}

void validate_probabilities(const SampleStack& stack) {
  const float* data = stack.samples.data();
  const std::size_t n = static_cast<std::size_t>(stack.samples.size());
  validate_floats(data, n);
  for (std::size_t i = 0; i < n; ++i) {
    if (data[i] < 0.0f || data[i] > 1.0f)
      fail(ErrorKind::invalid_value, "sample probability outside [0,1] at element " + std::to_string(i));
  }
}

Tensor make_tensor(const ProbMap& prob) { return Tensor(prob.dims, prob.values.cast<float>().eval()); }

Tensor make_tensor(const LabelMap& labels) { return Tensor(labels.dims, labels.values); }

Tensor make_tensor(const RawField& field) { return Tensor(field.dims, field.values.cast<float>().eval()); }

Tensor make_tensor(const SampleStack& stack) {
  Dims dims{stack.n_samples()};
  dims.insert(dims.end(), stack.dims.begin(), stack.dims.end());
  VoxelArray<float> flat = Eigen::Map<const VoxelArray<float>>(stack.samples.data(), stack.samples.size());
  return Tensor(std::move(dims), std::move(flat));
}

}  // namespace suq
