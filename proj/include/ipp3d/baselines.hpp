#pragma once

// Reference planners: uniform random, open-loop lawnmower coverage at the
// lowest altitude, and Monte Carlo tree search with progressive widening.

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "ipp3d/simenv.hpp"

namespace ipp3d {

// Common interface used by the evaluation harness. choose() returns the next
// node, or nullopt when the planner has nothing left to do.
class Planner {
 public:
  virtual ~Planner() = default;
  virtual std::string name() const = 0;
  virtual void reset() {}
  virtual std::optional<std::size_t> choose(const Environment& env) = 0;
};

// Uniform over the affordable neighbors. Throws StateError when there is none.
std::size_t random_policy(const Observation& obs, std::mt19937_64& rng);
std::size_t random_policy(const Environment& env, std::mt19937_64& rng);

class RandomPlanner : public Planner {
 public:
  explicit RandomPlanner(std::uint64_t seed) : rng_(seed) {}
  std::string name() const override { return "random"; }
  std::optional<std::size_t> choose(const Environment& env) override;

 private:
  std::mt19937_64 rng_;
};

// Boustrophedon sweep over every site at the given altitude level: rows in
// order, even rows left to right, odd rows right to left. Throws ConfigError
// if the roadmap is not one site per cell or the level does not exist.
std::vector<std::size_t> coverage_policy(const Roadmap& roadmap, double altitude = 8.0);

// Sum of Euclidean distances between consecutive nodes.
double path_length(const Roadmap& roadmap, const std::vector<std::size_t>& path);

// Cheapest travel route (by edge length) from one node to another, both ends
// included. Empty when unreachable.
std::vector<std::size_t> shortest_path(const Roadmap& roadmap, std::size_t from,
                                       std::size_t to);

// Follows coverage_policy open-loop, routing along shortest paths whenever the
// next waypoint is not adjacent (the first leg, from the start node, usually
// is not). Stops when the sweep is finished or the next move is unaffordable.
class CoveragePlanner : public Planner {
 public:
  explicit CoveragePlanner(double altitude = 8.0) : altitude_(altitude) {}
  std::string name() const override { return "coverage"; }
  void reset() override;
  std::optional<std::size_t> choose(const Environment& env) override;

 private:
  double altitude_;
  std::vector<std::size_t> sweep_;
  std::size_t next_ = 0;
  bool started_ = false;
};

struct MctsConfig {
  std::size_t iterations = 300;
  double ucb_c = 1.4;
  double pw_c = 2.0;
  double pw_alpha = 0.5;
  std::size_t rollout_depth = 6;
  double gamma = 0.99;

  void validate() const;
};

struct MctsChildStats {
  std::size_t node = 0;
  std::size_t visits = 0;
  double mean_return = 0.0;
};

struct MctsResult {
  std::size_t action = 0;
  std::size_t root_visits = 0;
  std::vector<MctsChildStats> children;
};

// Children allowed at a node with `visits` visits: max(1, ceil(pw_c * N^alpha)).
std::size_t widening_cap(std::size_t visits, const MctsConfig& cfg);

// Expected reduction of the region-of-interest trace from one measurement at
// `node`, using only the covariance diagonal: sum over footprint cells in the
// region of P_ii^2 / (P_ii + sigma^2).
double expected_trace_reduction(const Environment& env, std::size_t node,
                                const std::vector<std::uint8_t>& roi_mask);

// Searches on copies of env whose measurements equal the belief mean, so the
// hidden field is never read. Throws StateError when env is done.
MctsResult mcts_search(const Environment& env, const MctsConfig& cfg, std::mt19937_64& rng);
std::size_t mcts_plan(const Environment& env, const MctsConfig& cfg, std::mt19937_64& rng);

class MctsPlanner : public Planner {
 public:
  MctsPlanner(MctsConfig cfg, std::uint64_t seed) : cfg_(cfg), rng_(seed) {}
  std::string name() const override { return "mcts"; }
  std::optional<std::size_t> choose(const Environment& env) override;

 private:
  MctsConfig cfg_;
  std::mt19937_64 rng_;
};

}  // namespace ipp3d
