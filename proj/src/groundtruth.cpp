#include "ipp3d/groundtruth.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>

#include "ipp3d/errors.hpp"

namespace ipp3d {

void FieldGenConfig::validate() const {
  if (min_hotspots < 1 || max_hotspots < min_hotspots) {
    throw ConfigError("hotspot count range must satisfy 1 <= min <= max");
  }
  if (!(min_radius_frac > 0.0) || max_radius_frac < min_radius_frac) {
    throw ConfigError("hotspot radius range must satisfy 0 < min <= max");
  }
  if (p_high < 0.0 || p_high > 1.0 || p_low < 0.0 || p_low > 1.0) {
    throw ConfigError("Bernoulli probabilities must lie in [0,1]");
  }
  if (!(resolution > 0.0)) throw ConfigError("resolution must be positive");
}

GeneratedField generate_field_with_mask(std::size_t width, std::size_t height,
                                        std::uint64_t seed,
                                        const FieldGenConfig& gen) {
  if (width < 2 || height < 2) {
    throw DimensionError("field must be at least 2x2, got " +
                         std::to_string(width) + "x" + std::to_string(height));
  }
  gen.validate();

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> count_dist(gen.min_hotspots, gen.max_hotspots);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const double w = static_cast<double>(width);
  const double h = static_cast<double>(height);
  const double side = std::max(w, h);

  GeneratedField out;
  out.field.grid = {width, height, gen.resolution};
  out.field.values.assign(width * height, 0.0);
  out.hotspot_mask.assign(width * height, 0);

  const int hotspots = count_dist(rng);
  for (int s = 0; s < hotspots; ++s) {
    const double cx = unit(rng) * w;
    const double cy = unit(rng) * h;
    const double span = gen.max_radius_frac - gen.min_radius_frac;
    const double rx = (gen.min_radius_frac + unit(rng) * span) * side;
    const double ry = (gen.min_radius_frac + unit(rng) * span) * side;
    for (std::size_t row = 0; row < height; ++row) {
      for (std::size_t col = 0; col < width; ++col) {
        const double dx = (static_cast<double>(col) + 0.5 - cx) / rx;
        const double dy = (static_cast<double>(row) + 0.5 - cy) / ry;
        if (dx * dx + dy * dy <= 1.0) out.hotspot_mask[row * width + col] = 1;
      }
    }
    // The cell holding the center always belongs to the hotspot.
    const auto ccol = std::min(static_cast<std::size_t>(cx), width - 1);
    const auto crow = std::min(static_cast<std::size_t>(cy), height - 1);
    out.hotspot_mask[crow * width + ccol] = 1;
  }

  for (std::size_t i = 0; i < out.field.values.size(); ++i) {
    const double p = out.hotspot_mask[i] ? gen.p_high : gen.p_low;
    out.field.values[i] = unit(rng) < p ? 1.0 : 0.0;
  }
  return out;
}

GroundTruthField generate_field(std::size_t width, std::size_t height,
                                std::uint64_t seed, const FieldGenConfig& gen) {
  return generate_field_with_mask(width, height, seed, gen).field;
}

void RoiConfig::validate() const {
  if (mu_th < 0.0 || mu_th > 1.0) throw ConfigError("mu_th must lie in [0,1]");
  if (beta < 0.0) throw ConfigError("beta must be non-negative");
}

CellSet roi_mask(std::span<const double> mu, std::span<const double> sigma,
                 const RoiConfig& cfg) {
  if (mu.size() != sigma.size()) {
    throw DimensionError("roi_mask: mean and std-dev lengths differ");
  }
  CellSet roi;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    if (mu[i] + cfg.beta * sigma[i] >= cfg.mu_th) roi.push_back(i);
  }
  return roi;
}

double rmse_in_roi(std::span<const double> mu, const GroundTruthField& truth,
                   const CellSet& roi, bool* fell_back) {
  if (mu.size() != truth.size()) {
    throw DimensionError("rmse_in_roi: mean length does not match field");
  }
  if (fell_back) *fell_back = roi.empty();
  double sq = 0.0;
  std::size_t n = 0;
  if (roi.empty()) {
    spdlog::debug("rmse_in_roi: empty region of interest, using full map");
    for (std::size_t i = 0; i < mu.size(); ++i) {
      const double e = mu[i] - truth.values[i];
      sq += e * e;
    }
    n = mu.size();
  } else {
    for (std::size_t i : roi) {
      if (i >= mu.size()) throw IndexError("rmse_in_roi: cell index out of range");
      const double e = mu[i] - truth.values[i];
      sq += e * e;
    }
    n = roi.size();
  }
  return n == 0 ? 0.0 : std::sqrt(sq / static_cast<double>(n));
}

void write_grid(std::ostream& out, const GridGeometry& grid,
                std::span<const double> values) {
  if (values.size() != grid.size()) {
    throw DimensionError("write_grid: value count does not match geometry");
  }
  out << grid.width << ' ' << grid.height << ' '
      << std::setprecision(17) << grid.resolution << '\n';
  for (std::size_t row = 0; row < grid.height; ++row) {
    for (std::size_t col = 0; col < grid.width; ++col) {
      if (col) out << ' ';
      out << values[grid.index(col, row)];
    }
    out << '\n';
  }
}

GroundTruthField read_grid(std::istream& in) {
  GroundTruthField f;
  std::string header;
  if (!std::getline(in, header)) throw FormatError("grid: missing header line");
  std::istringstream hs(header);
  long long w = 0, h = 0;
  double r = 0.0;
  if (!(hs >> w >> h >> r) || w <= 0 || h <= 0 || !(r > 0.0)) {
    throw FormatError("grid: header must be 'w h r' with positive values");
  }
  f.grid = {static_cast<std::size_t>(w), static_cast<std::size_t>(h), r};
  f.values.resize(f.grid.size());
  for (double& v : f.values) {
    if (!(in >> v)) throw FormatError("grid: too few values");
  }
  double extra;
  if (in >> extra) throw FormatError("grid: trailing values after grid");
  return f;
}

void save_field(const std::string& path, const GroundTruthField& field) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open for writing: " + path);
  write_grid(out, field.grid, field.values);
}

GroundTruthField load_field(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open for reading: " + path);
  return read_grid(in);
}

}  // namespace ipp3d
