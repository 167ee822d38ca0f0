#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "ipp3d/geometry.hpp"

namespace ipp3d {

// Hidden per-cell occupancy field the agent reconstructs. Values lie in [0,1].
struct GroundTruthField {
  GridGeometry grid;
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  double at(std::size_t col, std::size_t row) const {
    return values[grid.index(col, row)];
  }
};

// Hotspots are axis-aligned ellipses; each cell is a Bernoulli draw with
// probability p_high inside any hotspot and p_low elsewhere. Radii are drawn as
// fractions of the larger map side.
struct FieldGenConfig {
  int min_hotspots = 2;
  int max_hotspots = 5;
  double min_radius_frac = 0.1;
  double max_radius_frac = 0.3;
  double p_high = 0.8;
  double p_low = 0.1;
  double resolution = 2.5;

  void validate() const;
};

struct GeneratedField {
  GroundTruthField field;
  std::vector<std::uint8_t> hotspot_mask;
};

GeneratedField generate_field_with_mask(std::size_t width, std::size_t height,
                                        std::uint64_t seed,
                                        const FieldGenConfig& gen = {});

GroundTruthField generate_field(std::size_t width, std::size_t height,
                                std::uint64_t seed, const FieldGenConfig& gen = {});

struct RoiConfig {
  double mu_th = 0.4;
  double beta = 1.0;

  void validate() const;
};

// Indices i with mu_i + beta * sigma_i >= mu_th, ascending.
CellSet roi_mask(std::span<const double> mu, std::span<const double> sigma,
                 const RoiConfig& cfg);

// RMSE of mu against the truth over `roi`. An empty roi falls back to the full
// map; `fell_back` reports whether that happened.
double rmse_in_roi(std::span<const double> mu, const GroundTruthField& truth,
                   const CellSet& roi, bool* fell_back = nullptr);

// Plain-text grid: a "w h r" header line, then one line per row.
void write_grid(std::ostream& out, const GridGeometry& grid,
                std::span<const double> values);
GroundTruthField read_grid(std::istream& in);
void save_field(const std::string& path, const GroundTruthField& field);
GroundTruthField load_field(const std::string& path);

}  // namespace ipp3d
