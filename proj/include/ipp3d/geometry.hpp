#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace ipp3d {

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  friend bool operator==(const Vec3&, const Vec3&) = default;
};

inline double distance(const Vec3& a, const Vec3& b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  const double dz = a.z - b.z;
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

inline Vec3 lerp(const Vec3& a, const Vec3& b, double t) {
  return {a.x + t * (b.x - a.x), a.y + t * (b.y - a.y), a.z + t * (b.z - a.z)};
}

// Sorted ascending, no duplicates.
using CellSet = std::vector<std::size_t>;

// Horizontal layout of the discretized field. Cell (col, row) has index
// row * width + col and its center at ((col + 0.5) r, (row + 0.5) r) meters.
struct GridGeometry {
  std::size_t width = 0;
  std::size_t height = 0;
  double resolution = 1.0;

  std::size_t size() const { return width * height; }
  std::size_t index(std::size_t col, std::size_t row) const {
    return row * width + col;
  }
  std::size_t col(std::size_t idx) const { return idx % width; }
  std::size_t row(std::size_t idx) const { return idx / width; }
  double center_x(std::size_t idx) const {
    return (static_cast<double>(col(idx)) + 0.5) * resolution;
  }
  double center_y(std::size_t idx) const {
    return (static_cast<double>(row(idx)) + 0.5) * resolution;
  }
  double extent_x() const { return static_cast<double>(width) * resolution; }
  double extent_y() const { return static_cast<double>(height) * resolution; }

  friend bool operator==(const GridGeometry&, const GridGeometry&) = default;
};

}  // namespace ipp3d
