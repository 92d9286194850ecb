#pragma once

#include <cstdint>
#include <filesystem>
#include <json.hpp>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "relab/tensor/matrix.hpp"
#include "relab/tensor/tensor.hpp"

namespace relab {

enum class DType : std::uint8_t { kF32 = 0, kF64 = 1 };

std::string_view dtype_name(DType d);

/// Tensor as stored on disk. Values are held in 64-bit regardless of the
/// on-disk dtype; f32 values widen and narrow back exactly.
struct StoredTensor {
  Shape shape;
  DType dtype = DType::kF32;
  std::vector<double> values;

  Matrix matrix() const;  // rank-2 only
  template <typename T>
  static StoredTensor from(const Tensor<T>& t);
  static StoredTensor from(const Matrix& m, DType dtype);
};

/// Binary layout (all integers little-endian):
///   "RLCKPT\0\1"  u32 version  u64 header_len  header (UTF-8 JSON)
///   u64 tensor_count, then per tensor:
///   u32 name_len  name  u8 dtype  u32 rank  u64 dims[rank]  payload
///
/// Tensor names carry a section prefix: "param/", "grad/" (probe
/// gradients) or "restart/<i>/<site>/{down,up}".
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  nlohmann::json header = nlohmann::json::object();
  std::vector<std::pair<std::string, StoredTensor>> tensors;

  bool has(std::string_view name) const;
  /// Throws FormatError naming the tensor when absent.
  const StoredTensor& tensor(std::string_view name) const;
  void add(std::string name, StoredTensor t);

  std::int64_t step() const;
  std::string mode() const;
};

std::string serialize_checkpoint(const Checkpoint& ckpt);
/// `source` names the input in error messages.
Checkpoint parse_checkpoint(std::string_view bytes, const std::string& source = "<memory>");

void write_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint read_checkpoint(const std::filesystem::path& path);

/// Checkpoint files in a directory (*.ckpt) in name order. The trainer
/// zero-pads step numbers so name order is step order.
std::vector<std::filesystem::path> list_checkpoints(const std::filesystem::path& dir);

}  // namespace relab
