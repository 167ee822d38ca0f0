#include "ipp3d/sensor.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "ipp3d/errors.hpp"

namespace ipp3d {

void SensorConfig::validate() const {
  if (!(a > 0.0) || !(b > 0.0)) throw ConfigError("sensor a and b must be positive");
  if (!(fov_half_angle_deg > 0.0 && fov_half_angle_deg < 90.0)) {
    throw ConfigError("sensor half angle must lie in (0, 90) degrees");
  }
  if (!(fov_scale_factor > 0.0 && fov_scale_factor <= 1.0)) {
    throw ConfigError("fov_scale_factor must lie in (0, 1]");
  }
}

double noise_variance(double altitude, const SensorConfig& cfg) {
  if (!(altitude >= 0.0)) throw DomainError("noise_variance: altitude must be >= 0");
  return cfg.a * -std::expm1(-cfg.b * altitude);
}

double footprint_side(double altitude, const SensorConfig& cfg) {
  const double half_angle = cfg.fov_half_angle_deg * std::numbers::pi / 180.0;
  double side = 2.0 * altitude * std::tan(half_angle);
  if (altitude > cfg.fov_scale_altitude) side *= cfg.fov_scale_factor;
  return side;
}

CellSet footprint_cells(const Vec3& pos, const GridGeometry& grid,
                        const SensorConfig& cfg) {
  if (!(pos.z > 0.0)) throw DomainError("footprint_cells: altitude must be > 0");
  if (!(pos.x >= 0.0 && pos.x <= grid.extent_x() && pos.y >= 0.0 &&
        pos.y <= grid.extent_y())) {
    throw DomainError("footprint_cells: position outside map bounds");
  }
  const double half = 0.5 * footprint_side(pos.z, cfg);
  const double r = grid.resolution;
  // Cell i has center (i + 0.5) r; keep |center - x| <= half.
  auto range = [&](double p, std::size_t count) {
    const double lo = std::ceil((p - half) / r - 0.5 - 1e-12);
    const double hi = std::floor((p + half) / r - 0.5 + 1e-12);
    const double clo = std::max(lo, 0.0);
    const double chi = std::min(hi, static_cast<double>(count) - 1.0);
    return std::pair<double, double>{clo, chi};
  };
  const auto [c0, c1] = range(pos.x, grid.width);
  const auto [r0, r1] = range(pos.y, grid.height);

  CellSet cells;
  if (c0 <= c1 && r0 <= r1) {
    for (auto row = static_cast<std::size_t>(r0); row <= static_cast<std::size_t>(r1); ++row) {
      for (auto col = static_cast<std::size_t>(c0); col <= static_cast<std::size_t>(c1); ++col) {
        cells.push_back(grid.index(col, row));
      }
    }
  }
  if (cells.empty()) {
    const auto col = std::min(static_cast<std::size_t>(pos.x / r), grid.width - 1);
    const auto row = std::min(static_cast<std::size_t>(pos.y / r), grid.height - 1);
    cells.push_back(grid.index(col, row));
  }
  return cells;
}

MeasurementBatch take_measurement(const Vec3& pos, const GroundTruthField& truth,
                                  const SensorConfig& cfg, std::mt19937_64& rng,
                                  std::vector<double>* raw_values) {
  MeasurementBatch batch;
  batch.cell_indices = footprint_cells(pos, truth.grid, cfg);
  const double var = noise_variance(pos.z, cfg);
  std::normal_distribution<double> noise(0.0, std::sqrt(var));
  batch.values.reserve(batch.cell_indices.size());
  if (raw_values) raw_values->clear();
  for (std::size_t c : batch.cell_indices) {
    const double raw = truth.values[c] + noise(rng);
    if (raw_values) raw_values->push_back(raw);
    batch.values.push_back(std::clamp(raw, 0.0, 1.0));
  }
  batch.variances.assign(batch.cell_indices.size(), var);
  return batch;
}

}  // namespace ipp3d
