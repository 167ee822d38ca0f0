#include "ipp3d/diffmath/serialize.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "ipp3d/errors.hpp"

namespace ipp3d::dm {
namespace {

template <class T>
T to_le(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
  }
  return v;
}

template <class T>
void put(std::ostream& out, T v) {
  v = to_le(v);
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& in, const char* what) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) {
    throw FormatError(std::string("parameter file truncated while reading ") + what);
  }
  return to_le(v);
}

constexpr std::uint64_t kMaxElements = std::uint64_t{1} << 32;

}  // namespace

void write_params(std::ostream& out, const NamedTensors& tensors) {
  out.write(kParamMagic, sizeof(kParamMagic));
  put<std::uint32_t>(out, kParamVersion);
  put<std::uint64_t>(out, tensors.size());
  for (const auto& [name, t] : tensors) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<std::uint32_t>(out, 2);
    put<std::uint64_t>(out, t.rows());
    put<std::uint64_t>(out, t.cols());
    for (double v : t.values()) put<double>(out, v);
  }
  if (!out) throw FormatError("failed writing parameter stream");
}

NamedTensors read_params(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kParamMagic, 4) != 0) {
    throw FormatError("not a parameter file (bad magic)");
  }
  const auto version = get<std::uint32_t>(in, "version");
  if (version != kParamVersion) {
    throw FormatError("unsupported parameter file version " + std::to_string(version));
  }
  const auto count = get<std::uint64_t>(in, "tensor count");
  NamedTensors result;
  for (std::uint64_t t = 0; t < count; ++t) {
    const auto len = get<std::uint32_t>(in, "name length");
    if (len > 4096) throw FormatError("tensor name too long");
    std::string name(len, '\0');
    if (!in.read(name.data(), len)) throw FormatError("parameter file truncated in name");
    const auto rank = get<std::uint32_t>(in, "rank");
    if (rank > 2) throw FormatError("tensor '" + name + "' has unsupported rank");
    std::uint64_t dims[2] = {1, 1};
    for (std::uint32_t r = 0; r < rank; ++r) {
      dims[2 - rank + r] = get<std::uint64_t>(in, "dims");
    }
    if (dims[0] * dims[1] > kMaxElements) throw FormatError("tensor too large");
    std::vector<double> data(dims[0] * dims[1]);
    for (auto& v : data) v = get<double>(in, "data");
    result.emplace_back(std::move(name), Tensor::from(dims[0], dims[1], std::move(data)));
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw FormatError("trailing bytes after parameter data");
  }
  return result;
}

void save_params(const std::filesystem::path& path, const NamedTensors& tensors) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  write_params(out, tensors);
}

NamedTensors load_params(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return read_params(in);
}

}  // namespace ipp3d::dm
