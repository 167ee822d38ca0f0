#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "ipp3d/errors.hpp"
#include "ipp3d/roadmap.hpp"
#include "oracles.hpp"

using namespace ipp3d;

namespace {

// Normalized Laplacian built directly from an edge list, for the oracle.
std::vector<double> normalized_laplacian(const Adjacency& adj) {
  const std::size_t n = adj.size();
  std::vector<double> a(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j : adj[i]) a[i * n + j] = a[j * n + i] = 1.0;
  std::vector<double> deg(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) deg[i] += a[i * n + j];
  std::vector<double> l(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      l[i * n + j] = (i == j ? 1.0 : 0.0) - a[i * n + j] / std::sqrt(deg[i] * deg[j]);
  return l;
}

}  // namespace

TEST(BuildRoadmap, FifteenByFifteenGraph) {
  const auto rm = build_roadmap_graph({15, 15, 2.5}, {8.0, 14.0}, 20);
  EXPECT_EQ(rm.size(), 450u);
  for (std::size_t i = 0; i < rm.size(); ++i) {
    ASSERT_EQ(rm.edges[i].size(), 20u);
    std::size_t low = 0;
    for (std::size_t j : rm.edges[i]) {
      EXPECT_NE(j, i);
      low += rm.nodes[j].z == 8.0 ? 1 : 0;
    }
    EXPECT_EQ(low, 10u);
  }
}

TEST(BuildRoadmap, TinyCompleteGraph) {
  const auto rm = build_roadmap_graph({2, 2, 1.0}, {5.0}, 3);
  for (std::size_t i = 0; i < 4; ++i) {
    auto e = rm.edges[i];
    std::sort(e.begin(), e.end());
    CellSet expected;
    for (std::size_t j = 0; j < 4; ++j)
      if (j != i) expected.push_back(j);
    EXPECT_EQ(e, expected);
  }
}

TEST(BuildRoadmap, MatchesBruteForceNearestNeighbours) {
  const auto rm = build_roadmap_graph({4, 4, 2.5}, {8.0, 14.0}, 4);
  for (std::size_t i = 0; i < rm.size(); ++i) {
    CellSet expected;
    for (double level : {8.0, 14.0}) {
      std::vector<std::pair<double, std::size_t>> all;
      for (std::size_t j = 0; j < rm.size(); ++j) {
        if (j == i || rm.nodes[j].z != level) continue;
        const double dx = rm.nodes[i].x - rm.nodes[j].x;
        const double dy = rm.nodes[i].y - rm.nodes[j].y;
        const double dz = rm.nodes[i].z - rm.nodes[j].z;
        all.emplace_back(std::sqrt(dx * dx + dy * dy + dz * dz), j);
      }
      std::sort(all.begin(), all.end());
      expected.push_back(all[0].second);
      expected.push_back(all[1].second);
    }
    EXPECT_EQ(rm.edges[i], expected) << "node " << i;
  }
  EXPECT_EQ(build_roadmap_graph({4, 4, 2.5}, {8.0, 14.0}, 4).edges, rm.edges);
}

TEST(BuildRoadmap, RejectsIndivisibleK) {
  EXPECT_THROW(build_roadmap_graph({4, 4, 2.5}, {8.0, 14.0}, 5), ConfigError);
  EXPECT_THROW(build_roadmap_graph({2, 2, 2.5}, {8.0}, 4), ConfigError);
}

TEST(BuildRoadmap, RandomSitesShareAcrossLevels) {
  const auto rm = build_roadmap_graph({6, 6, 2.5}, {8.0, 14.0}, 4, 20, 5);
  EXPECT_EQ(rm.size(), 40u);
  for (std::size_t s = 0; s < rm.sites; ++s) {
    EXPECT_EQ(rm.nodes[s].x, rm.nodes[rm.node_at(s, 1)].x);
    EXPECT_EQ(rm.nodes[s].y, rm.nodes[rm.node_at(s, 1)].y);
  }
}

TEST(LaplacianPe, PathGraphMatchesJacobiOracle) {
  const Adjacency path{{1}, {0, 2}, {1}};
  const auto pe = laplacian_pe(path, 1);
  const auto [vals, vecs] = oracle::jacobi_eigen(normalized_laplacian(path), 3);
  std::vector<double> fiedler{vecs[0 * 3 + 1], vecs[1 * 3 + 1], vecs[2 * 3 + 1]};
  std::size_t arg = 0;
  for (std::size_t i = 1; i < 3; ++i)
    if (std::abs(fiedler[i]) > std::abs(fiedler[arg]) + 1e-12) arg = i;
  if (fiedler[arg] < 0)
    for (double& v : fiedler) v = -v;
  EXPECT_NEAR(vals[1], 1.0, 1e-12);
  EXPECT_NEAR(pe.eigenvalues[0], vals[1], 1e-10);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(pe.vectors[i], fiedler[i], 1e-8);
}

TEST(LaplacianPe, CompleteGraphDegenerateSubspaceIsOrthonormal) {
  const Adjacency k4{{1, 2, 3}, {0, 2, 3}, {0, 1, 3}, {0, 1, 2}};
  const auto pe = laplacian_pe(k4, 2);
  EXPECT_NEAR(pe.eigenvalues[0], 4.0 / 3.0, 1e-10);
  EXPECT_NEAR(pe.eigenvalues[1], 4.0 / 3.0, 1e-10);
  double d00 = 0, d11 = 0, d01 = 0;
  for (std::size_t i = 0; i < 4; ++i) {
    d00 += pe.vectors[i * 2] * pe.vectors[i * 2];
    d11 += pe.vectors[i * 2 + 1] * pe.vectors[i * 2 + 1];
    d01 += pe.vectors[i * 2] * pe.vectors[i * 2 + 1];
  }
  EXPECT_NEAR(d00, 1.0, 1e-8);
  EXPECT_NEAR(d11, 1.0, 1e-8);
  EXPECT_NEAR(d01, 0.0, 1e-8);
}

TEST(LaplacianPe, ResidualAndOrthonormalityOnRoadmap) {
  const auto rm = build_roadmap_graph({5, 5, 2.5}, {8.0, 14.0}, 4);
  const std::size_t k = 8;
  const auto pe = laplacian_pe(rm.edges, k);
  const auto lap = normalized_laplacian(rm.edges);
  const std::size_t n = rm.size();
  for (std::size_t c = 0; c < k; ++c) {
    double res = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double lv = 0.0;
      for (std::size_t j = 0; j < n; ++j) lv += lap[i * n + j] * pe.vectors[j * k + c];
      res += std::pow(lv - pe.eigenvalues[c] * pe.vectors[i * k + c], 2);
    }
    EXPECT_LE(std::sqrt(res), 1e-6);
    for (std::size_t c2 = 0; c2 < k; ++c2) {
      double d = 0.0;
      for (std::size_t i = 0; i < n; ++i) d += pe.vectors[i * k + c] * pe.vectors[i * k + c2];
      EXPECT_NEAR(d, c == c2 ? 1.0 : 0.0, 1e-6);
    }
    // Largest-magnitude entry is positive.
    double best = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (std::abs(pe.vectors[i * k + c]) > std::abs(best) + 1e-12) best = pe.vectors[i * k + c];
    EXPECT_GT(best, 0.0);
  }
  EXPECT_TRUE(pe.connected);
}

TEST(LaplacianPe, DisconnectedGraphEncodesComponentsSeparately) {
  const Adjacency two{{1}, {0, 2}, {1}, {4}, {3}};
  const auto pe = laplacian_pe(two, 2);
  EXPECT_FALSE(pe.connected);
  // The pair {3,4} only has one non-trivial vector; its second column is padding.
  EXPECT_EQ(pe.vectors[3 * 2 + 1], 0.0);
  EXPECT_EQ(pe.vectors[4 * 2 + 1], 0.0);
  EXPECT_NEAR(std::abs(pe.vectors[3 * 2]), std::sqrt(0.5), 1e-12);
  EXPECT_THROW(laplacian_pe(two, 5), ConfigError);
}

TEST(NormalizeCoords, AffinePerAxis) {
  const auto out = normalize_coords({{0, 3, 8}, {5, 3, 8}, {10, 3, 14}});
  EXPECT_DOUBLE_EQ(out[1].x, 0.5);
  EXPECT_DOUBLE_EQ(out[2].x, 1.0);
  EXPECT_EQ(out[0].y, 0.0);  // degenerate axis maps to 0
  EXPECT_DOUBLE_EQ(out[2].z, 1.0);
  const auto again = normalize_coords({{0, 0, 0}, {0.5, 0.25, 1}, {1, 1, 0.5}});
  EXPECT_DOUBLE_EQ(again[1].x, 0.5);
  EXPECT_DOUBLE_EQ(again[1].y, 0.25);
}

TEST(NormalizeCoords, MatchesLoopAndPreservesOrder) {
  std::mt19937_64 rng(12);
  const auto xs = oracle::random_vector(50, rng, -20, 40);
  std::vector<Vec3> pts;
  for (double x : xs) pts.push_back({x, 1.0, 2.0});
  const auto out = normalize_coords(pts);
  const double lo = *std::min_element(xs.begin(), xs.end());
  const double hi = *std::max_element(xs.begin(), xs.end());
  for (std::size_t i = 0; i < 50; ++i) {
    EXPECT_NEAR(out[i].x, (xs[i] - lo) / (hi - lo), 1e-12);
    for (std::size_t j = 0; j < 50; ++j)
      if (xs[i] < xs[j]) EXPECT_LE(out[i].x, out[j].x);
  }
}

TEST(Augment, UniformPriorAndResolvedCell) {
  GridGeometry g{6, 6, 2.5};
  auto rm = build_roadmap_graph(g, {1.0, 14.0}, 4);
  BeliefState b = init_prior(g, {});
  auto ag = augment(rm, b, {});
  for (double m : ag.node_mu) EXPECT_DOUBLE_EQ(m, 0.5);
  for (const auto& p : ag.normalized_coords) {
    EXPECT_GE(p.x, 0.0);
    EXPECT_LE(p.z, 1.0);
  }
  // At 1 m the footprint is the single cell under the node.
  b.cov(7, 7) = 0.0;
  ag = augment(rm, b, {});
  EXPECT_EQ(ag.node_std[7], 0.0);
  EXPECT_GT(ag.node_std[8], 0.0);
}

TEST(Augment, MatchesFootprintAverage) {
  GridGeometry g{8, 8, 2.5};
  const auto rm = build_roadmap_graph(g, {8.0, 14.0}, 4);
  BeliefState b = init_prior(g, {});
  std::mt19937_64 rng(77);
  kalman_update_inplace(b, {{3, 20, 41}, {0.9, 0.1, 0.7}, {0.05, 0.05, 0.05}});
  const auto ag = augment(rm, b, {});
  std::uniform_int_distribution<std::size_t> pick(0, rm.size() - 1);
  for (int t = 0; t < 10; ++t) {
    const std::size_t v = pick(rng);
    const auto cells = footprint_cells(rm.nodes[v], g, {});
    double mu = 0, sd = 0;
    for (std::size_t c : cells) {
      mu += b.mu[c];
      sd += std::sqrt(b.cov(c, c));
    }
    EXPECT_NEAR(ag.node_mu[v], mu / cells.size(), 1e-12);
    EXPECT_NEAR(ag.node_std[v], sd / cells.size(), 1e-12);
  }
  const auto tr = augment(rm, b, {}, NodeUncertainty::kFootprintTrace);
  const auto cells = footprint_cells(rm.nodes[0], g, {});
  EXPECT_NEAR(tr.node_std[0], trace_over(b, cells), 1e-12);
}

TEST(EdgeList, WritesNodesThenEdges) {
  const auto rm = build_roadmap_graph({2, 2, 1.0}, {5.0}, 3);
  std::stringstream ss;
  write_edge_list(ss, rm);
  std::string line;
  std::getline(ss, line);
  EXPECT_EQ(line, "v 0 0.5 0.5 5");
  std::size_t edges = 0;
  while (std::getline(ss, line))
    if (line[0] != 'v') ++edges;
  EXPECT_EQ(edges, 12u);
}
