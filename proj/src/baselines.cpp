#include "ipp3d/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>

#include "ipp3d/errors.hpp"

namespace ipp3d {

std::size_t random_policy(const Observation& obs, std::mt19937_64& rng) {
  std::vector<std::size_t> options;
  for (std::size_t i = 0; i < obs.neighbors.size(); ++i) {
    if (obs.affordable[i]) options.push_back(obs.neighbors[i]);
  }
  if (options.empty()) throw StateError("random_policy: no affordable neighbor");
  std::uniform_int_distribution<std::size_t> pick(0, options.size() - 1);
  return options[pick(rng)];
}

std::size_t random_policy(const Environment& env, std::mt19937_64& rng) {
  const auto options = env.affordable_neighbors();
  if (options.empty()) throw StateError("random_policy: no affordable neighbor");
  std::uniform_int_distribution<std::size_t> pick(0, options.size() - 1);
  return options[pick(rng)];
}

std::optional<std::size_t> RandomPlanner::choose(const Environment& env) {
  if (env.done()) return std::nullopt;
  return random_policy(env, rng_);
}

std::vector<std::size_t> coverage_policy(const Roadmap& roadmap, double altitude) {
  const auto& levels = roadmap.altitude_levels;
  auto it = std::find_if(levels.begin(), levels.end(),
                         [&](double a) { return std::abs(a - altitude) < 1e-9; });
  if (it == levels.end()) throw ConfigError("coverage altitude is not a roadmap level");
  const std::size_t w = roadmap.grid.width, h = roadmap.grid.height;
  if (roadmap.sites != w * h) {
    throw ConfigError("coverage sweep needs one roadmap site per grid cell");
  }
  const std::size_t base = static_cast<std::size_t>(it - levels.begin()) * roadmap.sites;
  std::vector<std::size_t> seq;
  seq.reserve(w * h);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t k = 0; k < w; ++k) {
      const std::size_t c = r % 2 == 0 ? k : w - 1 - k;
      seq.push_back(base + roadmap.grid.index(c, r));
    }
  }
  return seq;
}

double path_length(const Roadmap& roadmap, const std::vector<std::size_t>& path) {
  double len = 0.0;
  for (std::size_t i = 1; i < path.size(); ++i) {
    len += distance(roadmap.nodes[path[i - 1]], roadmap.nodes[path[i]]);
  }
  return len;
}

std::vector<std::size_t> shortest_path(const Roadmap& roadmap, std::size_t from,
                                       std::size_t to) {
  const std::size_t n = roadmap.size();
  if (from >= n || to >= n) throw IndexError("shortest_path: node out of range");
  std::vector<double> dist(n, std::numeric_limits<double>::infinity());
  std::vector<std::size_t> prev(n, n);
  using Item = std::pair<double, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  dist[from] = 0.0;
  pq.emplace(0.0, from);
  while (!pq.empty()) {
    auto [d, u] = pq.top();
    pq.pop();
    if (d > dist[u]) continue;
    if (u == to) break;
    for (std::size_t v : roadmap.edges[u]) {
      const double nd = d + distance(roadmap.nodes[u], roadmap.nodes[v]);
      if (nd < dist[v]) {
        dist[v] = nd;
        prev[v] = u;
        pq.emplace(nd, v);
      }
    }
  }
  if (!std::isfinite(dist[to])) return {};
  std::vector<std::size_t> path;
  for (std::size_t v = to; v != n; v = prev[v]) path.push_back(v);
  std::reverse(path.begin(), path.end());
  return path;
}

void CoveragePlanner::reset() {
  sweep_.clear();
  next_ = 0;
  started_ = false;
}

std::optional<std::size_t> CoveragePlanner::choose(const Environment& env) {
  if (!started_) {
    sweep_ = coverage_policy(env.roadmap(), altitude_);
    next_ = 0;
    started_ = true;
  }
  const std::size_t cur = env.state().current_node;
  while (next_ < sweep_.size() && sweep_[next_] == cur) ++next_;
  if (next_ >= sweep_.size() || env.done()) return std::nullopt;

  const std::size_t target = sweep_[next_];
  const auto& adj = env.roadmap().edges[cur];
  std::size_t hop = target;
  if (std::find(adj.begin(), adj.end(), target) == adj.end()) {
    const auto path = shortest_path(env.roadmap(), cur, target);
    if (path.size() < 2) return std::nullopt;
    hop = path[1];
  }
  if (env.edge_cost(cur, hop) > env.state().remaining_budget + 1e-9) return std::nullopt;
  return hop;
}

void MctsConfig::validate() const {
  if (iterations < 1) throw ConfigError("mcts iterations must be >= 1");
  if (!(pw_alpha > 0.0 && pw_alpha < 1.0)) throw ConfigError("pw_alpha must be in (0,1)");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("mcts gamma must be in (0,1]");
  if (!(pw_c > 0.0)) throw ConfigError("pw_c must be > 0");
  if (!(ucb_c >= 0.0)) throw ConfigError("ucb_c must be >= 0");
}

std::size_t widening_cap(std::size_t visits, const MctsConfig& cfg) {
  const double cap =
      std::ceil(cfg.pw_c * std::pow(static_cast<double>(visits), cfg.pw_alpha) - 1e-12);
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::max(0.0, cap)));
}

double expected_trace_reduction(const Environment& env, std::size_t node,
                                const std::vector<std::uint8_t>& roi_mask) {
  const auto& ctx = env.context();
  const double var = noise_variance(env.roadmap().nodes[node].z, ctx.cfg.sensor);
  const auto& cov = env.state().belief.cov;
  double gain = 0.0;
  for (std::size_t c : ctx.footprints[node]) {
    if (!roi_mask[c]) continue;
    const double p = std::max(0.0, cov(c, c));
    if (p + var > 0.0) gain += p * p / (p + var);
  }
  return gain;
}

namespace {

struct TreeNode {
  std::size_t action = 0;  // roadmap node reached from the parent
  std::size_t visits = 0;
  double total = 0.0;
  double reward = 0.0;     // immediate reward of the transition into this node
  bool expanded = false;   // untried list initialized
  bool terminal = false;
  std::vector<std::size_t> children;
  std::vector<std::size_t> untried;
};

std::vector<std::uint8_t> roi_mask_of(const Environment& env) {
  std::vector<std::uint8_t> mask(env.state().belief.size(), 0);
  for (std::size_t c : env.reward_cells()) mask[c] = 1;
  return mask;
}

// Cost-benefit choice: highest expected trace reduction per second of travel.
std::size_t rollout_choice(const Environment& env, const std::vector<std::size_t>& options) {
  const auto mask = roi_mask_of(env);
  const std::size_t cur = env.state().current_node;
  std::size_t best = options.front();
  double best_score = -1.0;
  for (std::size_t j : options) {
    const double t = std::max(env.edge_cost(cur, j), 1e-9);
    const double score = expected_trace_reduction(env, j, mask) / t;
    if (score > best_score) {
      best_score = score;
      best = j;
    }
  }
  return best;
}

double rollout(Environment& sim, const MctsConfig& cfg) {
  double ret = 0.0, disc = 1.0;
  for (std::size_t d = 0; d < cfg.rollout_depth && !sim.done(); ++d) {
    const auto options = sim.affordable_neighbors();
    if (options.empty()) break;
    ret += disc * sim.step(rollout_choice(sim, options)).reward;
    disc *= cfg.gamma;
  }
  return ret;
}

}  // namespace

MctsResult mcts_search(const Environment& env, const MctsConfig& cfg, std::mt19937_64& rng) {
  cfg.validate();
  if (env.done()) throw StateError("mcts_search on a finished episode");
  Environment root_env = env;
  root_env.set_measurement_source(MeasurementSource::kBeliefMean);
  root_env.set_record_metrics(false);

  std::vector<TreeNode> tree(1);
  tree[0].action = env.state().current_node;
  double q_min = std::numeric_limits<double>::infinity();
  double q_max = -std::numeric_limits<double>::infinity();

  std::vector<std::size_t> path;
  std::vector<double> rewards;
  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    Environment sim = root_env;
    path.assign(1, 0);
    rewards.clear();
    std::size_t cur = 0;
    bool expanded_leaf = false;
    while (!expanded_leaf) {
      if (sim.done()) {
        tree[cur].terminal = true;
        break;
      }
      if (!tree[cur].expanded) {
        tree[cur].untried = sim.affordable_neighbors();
        tree[cur].expanded = true;
      }
      TreeNode& node = tree[cur];
      const bool can_widen = node.children.size() < widening_cap(node.visits, cfg);
      if (can_widen && !node.untried.empty()) {
        std::uniform_int_distribution<std::size_t> pick(0, node.untried.size() - 1);
        const std::size_t k = pick(rng);
        const std::size_t action = node.untried[k];
        node.untried.erase(node.untried.begin() + static_cast<std::ptrdiff_t>(k));
        const double r = sim.step(action).reward;
        TreeNode child;
        child.action = action;
        child.reward = r;
        tree.push_back(std::move(child));
        const std::size_t idx = tree.size() - 1;
        tree[cur].children.push_back(idx);
        path.push_back(idx);
        rewards.push_back(r);
        cur = idx;
        expanded_leaf = true;
        break;
      }
      if (node.children.empty()) break;
      // UCB1 over children with min-max normalized mean returns.
      const double log_n = std::log(static_cast<double>(std::max<std::size_t>(1, node.visits)));
      const double span = q_max > q_min ? q_max - q_min : 1.0;
      std::size_t best = node.children.front();
      double best_score = -std::numeric_limits<double>::infinity();
      for (std::size_t c : node.children) {
        const TreeNode& ch = tree[c];
        double score;
        if (ch.visits == 0) {
          score = std::numeric_limits<double>::infinity();
        } else {
          const double q = ch.total / static_cast<double>(ch.visits);
          const double qn = q_max > q_min ? (q - q_min) / span : 0.5;
          score = qn + cfg.ucb_c * std::sqrt(log_n / static_cast<double>(ch.visits));
        }
        if (score > best_score) {
          best_score = score;
          best = c;
        }
      }
      sim.step(tree[best].action);
      rewards.push_back(tree[best].reward);
      path.push_back(best);
      cur = best;
    }

    double g = sim.done() ? 0.0 : rollout(sim, cfg);
    tree[path[0]].visits += 1;
    for (std::size_t i = path.size(); i-- > 1;) {
      g = rewards[i - 1] + cfg.gamma * g;
      TreeNode& n = tree[path[i]];
      n.visits += 1;
      n.total += g;
      const double q = n.total / static_cast<double>(n.visits);
      q_min = std::min(q_min, q);
      q_max = std::max(q_max, q);
    }
  }

  MctsResult res;
  res.root_visits = tree[0].visits;
  double best_mean = -std::numeric_limits<double>::infinity();
  for (std::size_t c : tree[0].children) {
    const TreeNode& ch = tree[c];
    MctsChildStats s{ch.action, ch.visits,
                     ch.visits ? ch.total / static_cast<double>(ch.visits) : 0.0};
    res.children.push_back(s);
    if (ch.visits > 0 && s.mean_return > best_mean) {
      best_mean = s.mean_return;
      res.action = ch.action;
    }
  }
  if (res.children.empty()) throw StateError("mcts_search: root has no affordable action");
  return res;
}

std::size_t mcts_plan(const Environment& env, const MctsConfig& cfg, std::mt19937_64& rng) {
  return mcts_search(env, cfg, rng).action;
}

std::optional<std::size_t> MctsPlanner::choose(const Environment& env) {
  if (env.done()) return std::nullopt;
  return mcts_plan(env, cfg_, rng_);
}

}  // namespace ipp3d
