#pragma once

#include <random>

#include "ipp3d/belief.hpp"
#include "ipp3d/geometry.hpp"
#include "ipp3d/groundtruth.hpp"

namespace ipp3d {

// Downward-facing square camera. Measurement variance follows
// a * (1 - exp(-b h)); the footprint side is 2 h tan(half angle), multiplied by
// fov_scale_factor above fov_scale_altitude.
struct SensorConfig {
  double a = 0.2;
  double b = 0.05;
  double fov_half_angle_deg = 30.0;
  double fov_scale_altitude = 15.0;
  double fov_scale_factor = 1.0;

  void validate() const;
};

double noise_variance(double altitude, const SensorConfig& cfg);
double footprint_side(double altitude, const SensorConfig& cfg);

// Cells whose centers lie inside the footprint square, clipped to the map.
// Never empty: the cell under the sensor is returned when nothing else fits.
CellSet footprint_cells(const Vec3& pos, const GridGeometry& grid,
                        const SensorConfig& cfg);

// Values are truth + N(0, noise_variance(h)) clamped to [0,1]; the reported
// variance is the unclamped one. `raw_values`, when given, receives the draws
// before clamping.
MeasurementBatch take_measurement(const Vec3& pos, const GroundTruthField& truth,
                                  const SensorConfig& cfg, std::mt19937_64& rng,
                                  std::vector<double>* raw_values = nullptr);

}  // namespace ipp3d
