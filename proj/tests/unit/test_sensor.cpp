#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "ipp3d/errors.hpp"
#include "ipp3d/sensor.hpp"

using namespace ipp3d;

namespace {

CellSet brute_force_footprint(const Vec3& p, const GridGeometry& g, double side) {
  CellSet out;
  for (std::size_t c = 0; c < g.size(); ++c) {
    const double cx = (static_cast<double>(c % g.width) + 0.5) * g.resolution;
    const double cy = (static_cast<double>(c / g.width) + 0.5) * g.resolution;
    if (std::abs(cx - p.x) <= side / 2 && std::abs(cy - p.y) <= side / 2) out.push_back(c);
  }
  return out;
}

}  // namespace

TEST(NoiseVariance, ZeroAtGroundAndAsymptoteAtInfinity) {
  const SensorConfig cfg;
  EXPECT_EQ(noise_variance(0.0, cfg), 0.0);
  EXPECT_NEAR(noise_variance(1e6, cfg), cfg.a, 1e-9);
}

TEST(NoiseVariance, DirectEvaluation) {
  SensorConfig cfg;
  cfg.a = 0.2;
  cfg.b = 0.05;
  EXPECT_NEAR(noise_variance(8.0, cfg), 0.2 * (1.0 - std::exp(-0.4)), 1e-15);
  EXPECT_NEAR(noise_variance(8.0, cfg), 0.065936, 1e-6);
}

TEST(NoiseVariance, StrictlyIncreasingAndConcave) {
  const SensorConfig cfg;
  double prev = noise_variance(0.0, cfg);
  double prev_slope = 1e300;
  for (int i = 1; i <= 100; ++i) {
    const double h = 0.5 * i;
    const double v = noise_variance(h, cfg);
    EXPECT_GT(v, prev);
    const double slope = (v - prev) / 0.5;
    EXPECT_LT(slope, prev_slope);
    prev = v;
    prev_slope = slope;
  }
}

TEST(NoiseVariance, NegativeAltitudeThrows) {
  EXPECT_THROW(noise_variance(-1.0, {}), DomainError);
}

TEST(FootprintCells, LowAltitudeGivesCellUnderSensor) {
  const GridGeometry g{15, 15, 2.5};
  const auto cells = footprint_cells({6.0, 9.0, 0.5}, g, {});
  ASSERT_EQ(cells.size(), 1u);
  EXPECT_EQ(cells[0], g.index(2, 3));
}

TEST(FootprintCells, MatchesBruteForceAtEightMeters) {
  const GridGeometry g{15, 15, 2.5};
  const SensorConfig cfg;
  const double side = 2.0 * 8.0 * std::tan(30.0 * M_PI / 180.0);
  EXPECT_NEAR(side, 9.2376, 1e-4);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 37.5);
  for (int t = 0; t < 200; ++t) {
    const Vec3 p{u(rng), u(rng), 8.0};
    EXPECT_EQ(footprint_cells(p, g, cfg), brute_force_footprint(p, g, side));
  }
  EXPECT_EQ(footprint_cells({8.75, 8.75, 8.0}, g, cfg).size(), 9u);
}

TEST(FootprintCells, ClippedAtCorner) {
  const GridGeometry g{15, 15, 2.5};
  const auto cells = footprint_cells({0.0, 0.0, 40.0}, g, {});
  EXPECT_FALSE(cells.empty());
  for (std::size_t c : cells) EXPECT_LT(c, g.size());
  EXPECT_EQ(cells.front(), 0u);
}

TEST(FootprintCells, OutsideMapThrows) {
  EXPECT_THROW(footprint_cells({-1.0, 1.0, 8.0}, {4, 4, 1.0}, {}), DomainError);
  EXPECT_THROW(footprint_cells({1.0, 4.5, 8.0}, {4, 4, 1.0}, {}), DomainError);
}

TEST(FootprintCells, NonDecreasingBelowScaleAltitude) {
  const GridGeometry g{15, 15, 2.5};
  SensorConfig cfg;
  cfg.fov_scale_factor = 0.5;
  std::size_t prev = 0;
  for (double h = 0.5; h <= cfg.fov_scale_altitude; h += 0.25) {
    const auto n = footprint_cells({18.0, 18.0, h}, g, cfg).size();
    EXPECT_GE(n, prev);
    prev = n;
  }
  EXPECT_LT(footprint_cells({18.0, 18.0, 15.5}, g, cfg).size(), prev);
}

TEST(TakeMeasurement, NoiselessLimitReproducesTruth) {
  GroundTruthField t{{4, 4, 2.5}, std::vector<double>(16, 0.0)};
  for (std::size_t i = 0; i < 16; i += 3) t.values[i] = 1.0;
  SensorConfig cfg;
  cfg.a = 1e-30;
  std::mt19937_64 rng(1);
  const auto m = take_measurement({5.0, 5.0, 8.0}, t, cfg, rng);
  ASSERT_FALSE(m.cell_indices.empty());
  for (std::size_t i = 0; i < m.size(); ++i) {
    EXPECT_NEAR(m.values[i], t.values[m.cell_indices[i]], 1e-12);
  }
}

TEST(TakeMeasurement, DeterministicUnderSeed) {
  const GroundTruthField t{{6, 6, 2.5}, std::vector<double>(36, 0.5)};
  std::mt19937_64 r1(99), r2(99);
  const auto a = take_measurement({7.0, 7.0, 14.0}, t, {}, r1);
  const auto b = take_measurement({7.0, 7.0, 14.0}, t, {}, r2);
  EXPECT_EQ(a.values, b.values);
  EXPECT_EQ(a.cell_indices, b.cell_indices);
  for (double v : a.variances) EXPECT_DOUBLE_EQ(v, noise_variance(14.0, {}));
}

TEST(TakeMeasurement, SampleVarianceMatchesModel) {
    const GroundTruthField t{{3, 3, 2.5}, std::vector<double>(9, 0.5)};
  std::mt19937_64 rng(2024);
  double sum = 0.0, sq = 0.0;
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) {
    std::vector<double> raw;
    const auto m = take_measurement({3.75, 3.75, 8.0}, t, {}, rng, &raw);
    ASSERT_EQ(raw.size(), m.size());
    const double e = raw[0] - 0.5;
    sum += e;
    sq += e * e;
  }
  const double mean = sum / draws;
  const double var = (sq - draws * mean * mean) / (draws - 1);
  EXPECT_NEAR(var / noise_variance(8.0, {}), 1.0, 0.05);
}
