#include "ipp3d/roadmap.hpp"

#include <spdlog/spdlog.h>

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <queue>
#include <random>

#include "ipp3d/errors.hpp"

namespace ipp3d {
namespace {

std::vector<std::vector<std::size_t>> symmetrized(const Adjacency& adj) {
  std::vector<std::vector<std::size_t>> sym(adj.size());
  for (std::size_t i = 0; i < adj.size(); ++i) {
    for (std::size_t j : adj[i]) {
      if (j >= adj.size()) throw IndexError("adjacency refers to a missing node");
      if (j == i) continue;
      sym[i].push_back(j);
      sym[j].push_back(i);
    }
  }
  for (auto& row : sym) {
    std::sort(row.begin(), row.end());
    row.erase(std::unique(row.begin(), row.end()), row.end());
  }
  return sym;
}

std::vector<std::vector<std::size_t>> components(
    const std::vector<std::vector<std::size_t>>& sym) {
  std::vector<int> seen(sym.size(), 0);
  std::vector<std::vector<std::size_t>> comps;
  for (std::size_t s = 0; s < sym.size(); ++s) {
    if (seen[s]) continue;
    std::vector<std::size_t> comp;
    std::queue<std::size_t> q;
    q.push(s);
    seen[s] = 1;
    while (!q.empty()) {
      const std::size_t u = q.front();
      q.pop();
      comp.push_back(u);
      for (std::size_t v : sym[u]) {
        if (!seen[v]) {
          seen[v] = 1;
          q.push(v);
        }
      }
    }
    std::sort(comp.begin(), comp.end());
    comps.push_back(std::move(comp));
  }
  return comps;
}

}  // namespace

Roadmap build_roadmap_graph(const GridGeometry& grid, const std::vector<double>& altitudes,
                            std::size_t k, std::size_t random_sites, std::uint64_t seed) {
  if (grid.size() == 0) throw ConfigError("roadmap: empty grid");
  if (altitudes.empty()) throw ConfigError("roadmap: no altitude levels");
  for (double h : altitudes) {
    if (!(h > 0.0)) throw ConfigError("roadmap: altitude levels must be positive");
  }
  const std::size_t levels = altitudes.size();
  if (k == 0 || k % levels != 0) {
    throw ConfigError("roadmap: k must be a positive multiple of the level count");
  }

  Roadmap rm;
  rm.grid = grid;
  rm.altitude_levels = altitudes;

  std::vector<std::pair<double, double>> sites;
  if (random_sites == 0) {
    for (std::size_t c = 0; c < grid.size(); ++c) {
      sites.emplace_back(grid.center_x(c), grid.center_y(c));
    }
  } else {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> ux(0.0, grid.extent_x());
    std::uniform_real_distribution<double> uy(0.0, grid.extent_y());
    for (std::size_t s = 0; s < random_sites; ++s) {
      const double x = ux(rng);
      sites.emplace_back(x, uy(rng));
    }
  }
  rm.sites = sites.size();
  for (double h : altitudes) {
    for (const auto& [x, y] : sites) rm.nodes.push_back({x, y, h});
  }
  const std::size_t n = rm.nodes.size();
  const std::size_t per_level = k / levels;
  if (k >= n || per_level > rm.sites - 1) {
    throw ConfigError("roadmap: k too large for the number of nodes");
  }

  rm.edges.assign(n, {});
  std::vector<std::pair<double, std::size_t>> cand;
  for (std::size_t i = 0; i < n; ++i) {
    auto& out = rm.edges[i];
    out.reserve(k);
    for (std::size_t lvl = 0; lvl < levels; ++lvl) {
      cand.clear();
      for (std::size_t s = 0; s < rm.sites; ++s) {
        const std::size_t j = rm.node_at(s, lvl);
        if (j == i) continue;
        cand.emplace_back(distance(rm.nodes[i], rm.nodes[j]), j);
      }
      std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(per_level),
                        cand.end());
      for (std::size_t t = 0; t < per_level; ++t) out.push_back(cand[t].second);
    }
  }
  return rm;
}

Roadmap build_roadmap(const GridGeometry& grid, const RoadmapConfig& cfg) {
  Roadmap rm = build_roadmap_graph(grid, cfg.altitudes, cfg.k, cfg.random_sites, cfg.seed);
  LaplacianPe pe = laplacian_pe(rm.edges, cfg.k_pe);
  rm.pe = std::move(pe.vectors);
  rm.pe_dim = pe.dim;
  return rm;
}

LaplacianPe laplacian_pe(const Adjacency& adjacency, std::size_t k_pe) {
  const std::size_t n = adjacency.size();
  if (k_pe >= n) throw ConfigError("laplacian_pe: k_pe must be smaller than the node count");
  const auto sym = symmetrized(adjacency);
  const auto comps = components(sym);

  LaplacianPe out;
  out.dim = k_pe;
  out.vectors.assign(n * k_pe, 0.0);
  out.eigenvalues.assign(k_pe, 0.0);
  out.connected = comps.size() == 1;
  if (!out.connected) {
    spdlog::warn("laplacian_pe: graph has {} components, encoding each separately",
                 comps.size());
  }

  for (const auto& comp : comps) {
    const std::size_t s = comp.size();
    if (s < 2) continue;
    std::vector<std::size_t> local(n, 0);
    for (std::size_t a = 0; a < s; ++a) local[comp[a]] = a;

    Eigen::MatrixXd lap = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(s),
                                                    static_cast<Eigen::Index>(s));
    for (std::size_t a = 0; a < s; ++a) {
      const std::size_t u = comp[a];
      const double du = static_cast<double>(sym[u].size());
      for (std::size_t v : sym[u]) {
        const double dv = static_cast<double>(sym[v].size());
        lap(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(local[v])) =
            -1.0 / std::sqrt(du * dv);
      }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(lap);
    if (es.info() != Eigen::Success) {
      throw NumericalError("laplacian_pe: eigen decomposition failed");
    }
    const std::size_t take = std::min(k_pe, s - 1);
    for (std::size_t c = 0; c < take; ++c) {
      Eigen::VectorXd v = es.eigenvectors().col(static_cast<Eigen::Index>(c + 1));
      Eigen::Index arg = 0;
      double best = -1.0;
      for (Eigen::Index r = 0; r < v.size(); ++r) {
        if (std::abs(v(r)) > best + 1e-12) {
          best = std::abs(v(r));
          arg = r;
        }
      }
      if (v(arg) < 0.0) v = -v;
      for (std::size_t a = 0; a < s; ++a) {
        out.vectors[comp[a] * k_pe + c] = v(static_cast<Eigen::Index>(a));
      }
      if (out.connected) out.eigenvalues[c] = es.eigenvalues()(static_cast<Eigen::Index>(c + 1));
    }
  }
  return out;
}

std::vector<Vec3> normalize_coords(const std::vector<Vec3>& nodes) {
  std::vector<Vec3> out(nodes);
  if (nodes.empty()) return out;
  auto axis = [&](auto get) {
    double lo = get(nodes.front());
    double hi = lo;
    for (const auto& p : nodes) {
      lo = std::min(lo, get(p));
      hi = std::max(hi, get(p));
    }
    return std::pair<double, double>{lo, hi};
  };
  const auto [x0, x1] = axis([](const Vec3& p) { return p.x; });
  const auto [y0, y1] = axis([](const Vec3& p) { return p.y; });
  const auto [z0, z1] = axis([](const Vec3& p) { return p.z; });
  auto scale = [](double v, double lo, double hi) {
    return hi > lo ? (v - lo) / (hi - lo) : 0.0;
  };
  for (auto& p : out) {
    p.x = scale(p.x, x0, x1);
    p.y = scale(p.y, y0, y1);
    p.z = scale(p.z, z0, z1);
  }
  return out;
}

std::vector<CellSet> node_footprints(const Roadmap& roadmap, const SensorConfig& sensor) {
  std::vector<CellSet> fp;
  fp.reserve(roadmap.size());
  for (const auto& p : roadmap.nodes) fp.push_back(footprint_cells(p, roadmap.grid, sensor));
  return fp;
}

AugmentedGraph augment(const Roadmap& roadmap, const std::vector<CellSet>& footprints,
                       const std::vector<Vec3>& normalized, const BeliefState& belief,
                       NodeUncertainty mode) {
  if (belief.size() != roadmap.grid.size() || footprints.size() != roadmap.size() ||
      normalized.size() != roadmap.size()) {
    throw DimensionError("augment: roadmap, footprints and belief disagree in size");
  }
  AugmentedGraph g;
  g.normalized_coords = normalized;
  g.node_mu.resize(roadmap.size());
  g.node_std.resize(roadmap.size());
  const std::vector<double> sd = belief.std_devs();
  for (std::size_t v = 0; v < roadmap.size(); ++v) {
    double mu = 0.0;
    double unc = 0.0;
    for (std::size_t c : footprints[v]) {
      mu += belief.mu[c];
      unc += mode == NodeUncertainty::kMeanStd ? sd[c] : sd[c] * sd[c];
    }
    const double count = static_cast<double>(footprints[v].size());
    g.node_mu[v] = mu / count;
    g.node_std[v] = mode == NodeUncertainty::kMeanStd ? unc / count : unc;
  }
  return g;
}

AugmentedGraph augment(const Roadmap& roadmap, const BeliefState& belief,
                       const SensorConfig& sensor, NodeUncertainty mode) {
  return augment(roadmap, node_footprints(roadmap, sensor), normalize_coords(roadmap.nodes),
                 belief, mode);
}

void write_edge_list(std::ostream& out, const Roadmap& roadmap) {
  for (std::size_t i = 0; i < roadmap.size(); ++i) {
    const auto& p = roadmap.nodes[i];
    out << "v " << i << ' ' << p.x << ' ' << p.y << ' ' << p.z << '\n';
  }
  for (std::size_t i = 0; i < roadmap.size(); ++i) {
    for (std::size_t j : roadmap.edges[i]) out << i << ' ' << j << '\n';
  }
}

}  // namespace ipp3d
