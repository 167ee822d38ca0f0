#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <vector>

#include "ipp3d/belief.hpp"
#include "ipp3d/groundtruth.hpp"
#include "ipp3d/roadmap.hpp"
#include "ipp3d/sensor.hpp"

namespace ipp3d {

struct EnvConfig {
  double budget = 150.0;                 // seconds
  double speed = 2.0;                    // m/s
  double measurement_interval = 0.2;     // fraction of the map width
  Vec3 start_position{2.0, 2.0, 14.0};   // meters
  RoiConfig roi;
  SensorConfig sensor;
  GpHyperparams gp;
  NodeUncertainty node_uncertainty = NodeUncertainty::kMeanStd;

  void validate() const;
};

struct MetricSample {
  double time = 0.0;
  double roi_trace = 0.0;
  double full_trace = 0.0;
  double rmse = 0.0;
};

struct EpisodeState {
  std::size_t current_node = 0;
  double remaining_budget = 0.0;
  BeliefState belief;
  std::vector<std::size_t> trajectory;
  double distance_since_measurement = 0.0;  // normalized map units
  std::vector<MetricSample> metrics_log;
  std::size_t measurement_count = 0;
  bool done = false;
};

struct Observation {
  AugmentedGraph graph;
  std::size_t current_node = 0;
  std::vector<std::size_t> neighbors;
  std::vector<std::uint8_t> affordable;
  double remaining_budget = 0.0;
};

struct StepResult {
  double reward = 0.0;
  bool done = false;
  double cost = 0.0;
  double trace_before = 0.0;
  double trace_after = 0.0;
  std::size_t measurements = 0;
};

// Reward from the uncertainty within the region of interest before and after
// a step: relative reduction scaled by 10. A zero starting trace yields 0.
double compute_reward(double trace_before, double trace_after);

// Measurements either sample the hidden field or, for look-ahead search, equal
// the current belief mean (so only the covariance changes).
enum class MeasurementSource { kGroundTruth, kBeliefMean };

// Everything that is fixed for a roadmap/config pair and shared by every
// episode and every environment copy.
struct EnvContext {
  std::shared_ptr<const Roadmap> roadmap;
  EnvConfig cfg;
  std::vector<CellSet> footprints;
  std::vector<Vec3> normalized;
  BeliefState prior;
  double map_width = 0.0;  // meters; one normalized unit
  std::size_t start_node = 0;
};

std::shared_ptr<const EnvContext> make_context(std::shared_ptr<const Roadmap> roadmap,
                                               const EnvConfig& cfg);

// Node at the level matching p.z whose site lies within half a cell of (x, y)
// in both axes. Throws ConfigError when there is none.
std::size_t resolve_node(const Roadmap& roadmap, const Vec3& p);

class Environment {
 public:
  Environment(std::shared_ptr<const EnvContext> ctx,
              std::shared_ptr<const GroundTruthField> truth, std::uint64_t seed,
              MeasurementSource source = MeasurementSource::kGroundTruth);

  // Restarts at the configured start node, or at `start_node` when given.
  Observation reset(std::optional<std::size_t> start_node = std::nullopt);
  StepResult step(std::size_t target_node);
  Observation observe() const;

  const EpisodeState& state() const { return state_; }
  bool done() const { return state_.done; }
  double elapsed() const { return ctx_->cfg.budget - state_.remaining_budget; }
  const EnvContext& context() const { return *ctx_; }
  const Roadmap& roadmap() const { return *ctx_->roadmap; }
  const GroundTruthField& truth() const { return *truth_; }

  double edge_cost(std::size_t from, std::size_t to) const;
  std::vector<std::size_t> affordable_neighbors() const;
  CellSet current_roi() const;
  // Region of interest, or every cell when the region is empty.
  CellSet reward_cells() const;
  MetricSample current_metrics() const;

  void set_measurement_source(MeasurementSource s) { source_ = s; }
  void set_record_metrics(bool on) { record_metrics_ = on; }

 private:
  void measure_at(const Vec3& pos);
  bool has_affordable_move() const;

  std::shared_ptr<const EnvContext> ctx_;
  std::shared_ptr<const GroundTruthField> truth_;
  std::mt19937_64 rng_;
  MeasurementSource source_;
  bool record_metrics_ = true;
  EpisodeState state_;
};

}  // namespace ipp3d
