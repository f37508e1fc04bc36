#pragma once

// Named-tensor container. Layout (all integers and floats little-endian):
//
//   "TGNSCKPT"                  8-byte magic
//   u32 version                 currently 1
//   u32 count
//   count x {
//     u32 name_len, name bytes (UTF-8, no terminator)
//     u32 rank, u64 dims[rank]
//     f64 values[prod(dims)]    row-major
//   }
//
// See docs/checkpoint.md for the naming conventions.

#include <filesystem>
#include <string>
#include <vector>

#include "tgnseal/tensor.hpp"

namespace tgnseal {

struct NamedTensor {
  std::string name;
  Shape shape;
  std::vector<double> values;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const std::vector<NamedTensor>& tensors);
/// Throws IoError if unreadable, FormatError on a bad magic/version/truncation.
std::vector<NamedTensor> load_checkpoint(const std::filesystem::path& path);

/// Looks up `name`; throws FormatError if missing.
const NamedTensor& find_tensor(const std::vector<NamedTensor>& tensors, const std::string& name);

}  // namespace tgnseal
