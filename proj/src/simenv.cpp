#include "ipp3d/simenv.hpp"

#include <algorithm>
#include <cmath>

#include "ipp3d/errors.hpp"

namespace ipp3d {
namespace {
constexpr double kBudgetSlack = 1e-9;
}

void EnvConfig::validate() const {
  if (!(budget >= 0.0)) throw ConfigError("budget must be non-negative");
  if (!(speed > 0.0)) throw ConfigError("speed must be positive");
  if (!(measurement_interval > 0.0)) throw ConfigError("measurement interval must be positive");
  roi.validate();
  sensor.validate();
  gp.validate();
}

double compute_reward(double trace_before, double trace_after) {
  if (!(trace_before > 0.0)) return 0.0;
  const double r = (trace_before - trace_after) / trace_before * 10.0;
  return std::clamp(r, 0.0, 10.0);
}

std::size_t resolve_node(const Roadmap& roadmap, const Vec3& p) {
  std::optional<std::size_t> level;
  for (std::size_t l = 0; l < roadmap.altitude_levels.size(); ++l) {
    if (std::abs(roadmap.altitude_levels[l] - p.z) < 1e-9) level = l;
  }
  if (!level) throw ConfigError("start altitude does not match any roadmap level");
  const double half = 0.5 * roadmap.grid.resolution;
  std::optional<std::size_t> best;
  double best_d = 0.0;
  for (std::size_t s = 0; s < roadmap.sites; ++s) {
    const std::size_t v = roadmap.node_at(s, *level);
    const double dx = std::abs(roadmap.nodes[v].x - p.x);
    const double dy = std::abs(roadmap.nodes[v].y - p.y);
    if (dx <= half && dy <= half) {
      const double d = dx * dx + dy * dy;
      if (!best || d < best_d) {
        best = v;
        best_d = d;
      }
    }
  }
  if (!best) throw ConfigError("start position is not on the roadmap");
  return *best;
}

std::shared_ptr<const EnvContext> make_context(std::shared_ptr<const Roadmap> roadmap,
                                               const EnvConfig& cfg) {
  cfg.validate();
  auto ctx = std::make_shared<EnvContext>();
  ctx->cfg = cfg;
  ctx->footprints = node_footprints(*roadmap, cfg.sensor);
  ctx->normalized = normalize_coords(roadmap->nodes);
  ctx->prior = init_prior(roadmap->grid, cfg.gp);
  ctx->map_width = std::max(roadmap->grid.extent_x(), roadmap->grid.extent_y());
  ctx->start_node = resolve_node(*roadmap, cfg.start_position);
  ctx->roadmap = std::move(roadmap);
  return ctx;
}

Environment::Environment(std::shared_ptr<const EnvContext> ctx,
                         std::shared_ptr<const GroundTruthField> truth,
                         std::uint64_t seed, MeasurementSource source)
    : ctx_(std::move(ctx)), truth_(std::move(truth)), rng_(seed), source_(source) {
  if (truth_->grid != ctx_->roadmap->grid) {
    throw DimensionError("ground truth and roadmap grids differ");
  }
  reset();
}

Observation Environment::reset(std::optional<std::size_t> start_node) {
  const std::size_t start = start_node.value_or(ctx_->start_node);
  if (start >= roadmap().size()) throw ConfigError("start node out of range");
  state_ = EpisodeState{};
  state_.current_node = start;
  state_.remaining_budget = ctx_->cfg.budget;
  state_.belief = ctx_->prior;
  state_.trajectory = {start};
  state_.done = !has_affordable_move();
  if (record_metrics_) state_.metrics_log.push_back(current_metrics());
  return observe();
}

double Environment::edge_cost(std::size_t from, std::size_t to) const {
  return distance(roadmap().nodes[from], roadmap().nodes[to]) / ctx_->cfg.speed;
}

bool Environment::has_affordable_move() const {
  for (std::size_t j : roadmap().edges[state_.current_node]) {
    if (edge_cost(state_.current_node, j) <= state_.remaining_budget + kBudgetSlack) {
      return true;
    }
  }
  return false;
}

std::vector<std::size_t> Environment::affordable_neighbors() const {
  std::vector<std::size_t> out;
  for (std::size_t j : roadmap().edges[state_.current_node]) {
    if (edge_cost(state_.current_node, j) <= state_.remaining_budget + kBudgetSlack) {
      out.push_back(j);
    }
  }
  return out;
}

CellSet Environment::current_roi() const {
  return roi_mask(state_.belief.clamped_mean(), state_.belief.std_devs(), ctx_->cfg.roi);
}

CellSet Environment::reward_cells() const {
  CellSet roi = current_roi();
  if (roi.empty()) {
    roi.resize(state_.belief.size());
    for (std::size_t i = 0; i < roi.size(); ++i) roi[i] = i;
  }
  return roi;
}

MetricSample Environment::current_metrics() const {
  const CellSet roi = current_roi();
  MetricSample s;
  s.time = elapsed();
  s.full_trace = full_trace(state_.belief);
  s.roi_trace = roi.empty() ? s.full_trace : trace_over(state_.belief, roi);
  s.rmse = rmse_in_roi(state_.belief.clamped_mean(), *truth_, roi);
  return s;
}

Observation Environment::observe() const {
  Observation obs;
  obs.graph = augment(roadmap(), ctx_->footprints, ctx_->normalized, state_.belief,
                      ctx_->cfg.node_uncertainty);
  obs.current_node = state_.current_node;
  obs.neighbors = roadmap().edges[state_.current_node];
  obs.affordable.reserve(obs.neighbors.size());
  for (std::size_t j : obs.neighbors) {
    obs.affordable.push_back(
        edge_cost(state_.current_node, j) <= state_.remaining_budget + kBudgetSlack ? 1 : 0);
  }
  obs.remaining_budget = state_.remaining_budget;
  return obs;
}

void Environment::measure_at(const Vec3& pos) {
  if (source_ == MeasurementSource::kGroundTruth) {
    kalman_update_inplace(state_.belief, take_measurement(pos, *truth_, ctx_->cfg.sensor, rng_));
  } else {
    const CellSet cells = footprint_cells(pos, truth_->grid, ctx_->cfg.sensor);
    const std::vector<double> var(cells.size(), noise_variance(pos.z, ctx_->cfg.sensor));
    kalman_covariance_update_inplace(state_.belief, cells, var);
  }
  ++state_.measurement_count;
}

StepResult Environment::step(std::size_t target_node) {
  if (state_.done) throw StateError("step called on a finished episode");
  const auto& adj = roadmap().edges[state_.current_node];
  if (std::find(adj.begin(), adj.end(), target_node) == adj.end()) {
    throw InvalidActionError("node " + std::to_string(target_node) +
                             " is not adjacent to the current node");
  }
  StepResult res;
  res.cost = edge_cost(state_.current_node, target_node);
  if (res.cost > state_.remaining_budget + kBudgetSlack) {
    throw InvalidActionError("edge cost exceeds the remaining budget");
  }

  const CellSet cells = reward_cells();
  res.trace_before = trace_over(state_.belief, cells);

  const Vec3 from = roadmap().nodes[state_.current_node];
  const Vec3 to = roadmap().nodes[target_node];
  const double interval = ctx_->cfg.measurement_interval;
  const double length = distance(from, to) / ctx_->map_width;
  const double carried = state_.distance_since_measurement;
  const double travelled = carried + length;
  const auto crossings = static_cast<std::size_t>(std::floor(travelled / interval + 1e-9));
  for (std::size_t k = 1; k <= crossings; ++k) {
    const double along = static_cast<double>(k) * interval - carried;
    const double t = length > 0.0 ? std::clamp(along / length, 0.0, 1.0) : 1.0;
    measure_at(lerp(from, to, t));
  }
  measure_at(to);
  res.measurements = crossings + 1;
  state_.distance_since_measurement =
      std::max(0.0, travelled - static_cast<double>(crossings) * interval);

  state_.remaining_budget = std::max(0.0, state_.remaining_budget - res.cost);
  state_.current_node = target_node;
  state_.trajectory.push_back(target_node);

  res.trace_after = trace_over(state_.belief, cells);
  res.reward = compute_reward(res.trace_before, res.trace_after);
  state_.done = !has_affordable_move();
  res.done = state_.done;
  if (record_metrics_) state_.metrics_log.push_back(current_metrics());
  return res;
}

}  // namespace ipp3d
