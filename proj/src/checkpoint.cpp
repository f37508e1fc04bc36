#include "tgnseal/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "tgnseal/errors.hpp"

namespace tgnseal {
namespace {

constexpr char kMagic[8] = {'T', 'G', 'N', 'S', 'C', 'K', 'P', 'T'};

template <typename U>
void put_le(std::ostream& os, U value) {
  char bytes[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) bytes[i] = static_cast<char>((value >> (8 * i)) & 0xFF);
  os.write(bytes, sizeof(U));
}

template <typename U>
U get_le(std::istream& is) {
  unsigned char bytes[sizeof(U)];
  if (!is.read(reinterpret_cast<char*>(bytes), sizeof(U))) throw FormatError("checkpoint: truncated file");
  U value = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) value |= static_cast<U>(bytes[i]) << (8 * i);
  return value;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const std::vector<NamedTensor>& tensors) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os.write(kMagic, sizeof(kMagic));
  put_le<std::uint32_t>(os, kCheckpointVersion);
  put_le<std::uint32_t>(os, static_cast<std::uint32_t>(tensors.size()));
  for (const NamedTensor& t : tensors) {
    if (shape_numel(t.shape) != t.values.size())
      throw ShapeError("checkpoint: tensor '" + t.name + "' has inconsistent shape");
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(t.name.size()));
    os.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(t.shape.size()));
    for (std::size_t d : t.shape) put_le<std::uint64_t>(os, d);
    for (double v : t.values) put_le<std::uint64_t>(os, std::bit_cast<std::uint64_t>(v));
  }
  if (!os) throw IoError("failed writing " + path.string());
}

std::vector<NamedTensor> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  char magic[8];
  if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw FormatError("checkpoint: bad magic in " + path.string());
  const auto version = get_le<std::uint32_t>(is);
  if (version != kCheckpointVersion)
    throw FormatError("checkpoint: unsupported version " + std::to_string(version));
  const auto count = get_le<std::uint32_t>(is);
  std::vector<NamedTensor> out;
  out.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor t;
    t.name.resize(get_le<std::uint32_t>(is));
    if (!is.read(t.name.data(), static_cast<std::streamsize>(t.name.size())))
      throw FormatError("checkpoint: truncated name");
    const auto rank = get_le<std::uint32_t>(is);
    for (std::uint32_t d = 0; d < rank; ++d) t.shape.push_back(get_le<std::uint64_t>(is));
    t.values.resize(shape_numel(t.shape));
    for (double& v : t.values) v = std::bit_cast<double>(get_le<std::uint64_t>(is));
    out.push_back(std::move(t));
  }
  return out;
}

const NamedTensor& find_tensor(const std::vector<NamedTensor>& tensors, const std::string& name) {
  for (const NamedTensor& t : tensors)
    if (t.name == name) return t;
  throw FormatError("checkpoint: missing tensor '" + name + "'");
}

}  // namespace tgnseal
