#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "ipp3d/belief.hpp"
#include "ipp3d/geometry.hpp"
#include "ipp3d/sensor.hpp"

namespace ipp3d {

using Adjacency = std::vector<std::vector<std::size_t>>;

// Multi-altitude decision graph. Node index = level * sites + site, so every
// horizontal site appears once per altitude level.
struct Roadmap {
  GridGeometry grid;
  std::vector<double> altitude_levels;
  std::size_t sites = 0;
  std::vector<Vec3> nodes;
  Adjacency edges;
  // Row-major nodes x pe_dim Laplacian positional encoding.
  std::vector<double> pe;
  std::size_t pe_dim = 0;

  std::size_t size() const { return nodes.size(); }
  std::size_t level_of(std::size_t node) const { return node / sites; }
  std::size_t site_of(std::size_t node) const { return node % sites; }
  std::size_t node_at(std::size_t site, std::size_t level) const {
    return level * sites + site;
  }
};

struct RoadmapConfig {
  std::vector<double> altitudes{8.0, 14.0};
  std::size_t k = 20;
  std::size_t k_pe = 32;
  // 0 places one site per cell center; otherwise that many uniformly sampled
  // sites (classic PRM sampling).
  std::size_t random_sites = 0;
  std::uint64_t seed = 0;
};

// Builds nodes and altitude-balanced k-nearest adjacency (k / levels nearest per
// level by 3D distance, self excluded, ties to the lower index), then attaches
// the positional encoding.
Roadmap build_roadmap(const GridGeometry& grid, const RoadmapConfig& cfg);

// Same, without positional encoding (pe_dim = 0).
Roadmap build_roadmap_graph(const GridGeometry& grid, const std::vector<double>& altitudes,
                            std::size_t k, std::size_t random_sites = 0,
                            std::uint64_t seed = 0);

// Eigenvectors of the symmetric normalized Laplacian of the symmetrized graph,
// ascending eigenvalue, trivial one skipped, sign chosen so the largest-
// magnitude entry is positive. Disconnected graphs are encoded per component
// and zero-padded. Returns row-major nodes x k_pe.
struct LaplacianPe {
  std::vector<double> vectors;
  std::vector<double> eigenvalues;  // per column; components may differ
  std::size_t dim = 0;
  bool connected = true;
};
LaplacianPe laplacian_pe(const Adjacency& adjacency, std::size_t k_pe);

std::vector<Vec3> normalize_coords(const std::vector<Vec3>& nodes);

enum class NodeUncertainty { kMeanStd, kFootprintTrace };

// Observation graph: roadmap plus per-node belief statistics over the node's
// sensor footprint.
struct AugmentedGraph {
  std::vector<double> node_mu;
  std::vector<double> node_std;
  std::vector<Vec3> normalized_coords;
};

// Footprints are static per roadmap and sensor; computing them once keeps
// augment() linear in the total footprint size.
std::vector<CellSet> node_footprints(const Roadmap& roadmap, const SensorConfig& sensor);

AugmentedGraph augment(const Roadmap& roadmap, const BeliefState& belief,
                       const SensorConfig& sensor,
                       NodeUncertainty mode = NodeUncertainty::kMeanStd);
AugmentedGraph augment(const Roadmap& roadmap, const std::vector<CellSet>& footprints,
                       const std::vector<Vec3>& normalized,
                       const BeliefState& belief,
                       NodeUncertainty mode = NodeUncertainty::kMeanStd);

// "i j" per directed edge, preceded by a node list "v i x y z".
void write_edge_list(std::ostream& out, const Roadmap& roadmap);

}  // namespace ipp3d
