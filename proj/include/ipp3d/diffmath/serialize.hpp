#pragma once

// Flat binary parameter files.
//
//   magic "IPPW" | u32 version | u64 tensor count
//   per tensor: u32 name length | name bytes | u32 rank | u64 dims[rank] |
//               f64 data[prod(dims)]
//
// All integers and floats are little-endian. Tensors are written with rank 2;
// rank 0 and rank 1 are accepted on read as 1 x 1 and 1 x n.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "ipp3d/diffmath/tensor.hpp"

namespace ipp3d::dm {

inline constexpr char kParamMagic[4] = {'I', 'P', 'P', 'W'};
inline constexpr std::uint32_t kParamVersion = 1;

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

void write_params(std::ostream& out, const NamedTensors& tensors);
// Throws FormatError on a bad magic, unknown version, truncation or trailing
// bytes. Loaded tensors do not require gradients.
NamedTensors read_params(std::istream& in);

void save_params(const std::filesystem::path& path, const NamedTensors& tensors);
NamedTensors load_params(const std::filesystem::path& path);

}  // namespace ipp3d::dm
