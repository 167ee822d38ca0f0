#include "ipp3d/harness.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include "ipp3d/errors.hpp"
#include "ipp3d/seeding.hpp"

namespace ipp3d {

namespace fs = std::filesystem;

std::string_view planner_name(PlannerKind k) {
  switch (k) {
    case PlannerKind::kPolicy: return "policy";
    case PlannerKind::kRandom: return "random";
    case PlannerKind::kCoverage: return "coverage";
    case PlannerKind::kMcts: return "mcts";
  }
  return "unknown";
}

PlannerKind parse_planner(std::string_view name) {
  for (auto k : {PlannerKind::kPolicy, PlannerKind::kRandom, PlannerKind::kCoverage,
                 PlannerKind::kMcts}) {
    if (planner_name(k) == name) return k;
  }
  throw ConfigError("unknown planner '" + std::string(name) +
                    "' (expected policy, random, coverage or mcts)");
}

void ExperimentConfig::validate() const {
  if (map_width < 2 || map_height < 2) throw ConfigError("map must be at least 2 x 2");
  if (altitudes.empty()) throw ConfigError("at least one altitude level is required");
  if (trials < 1) throw ConfigError("trials must be >= 1");
  if (!(budget > 0.0) || !std::isfinite(budget)) throw ConfigError("budget must be > 0");
  if (workers < 1) throw ConfigError("workers must be >= 1");
  for (std::size_t i = 0; i < eval_times.size(); ++i) {
    if (!(eval_times[i] >= 0.0)) throw ConfigError("eval_times must be >= 0");
    if (i > 0 && !(eval_times[i] > eval_times[i - 1])) {
      throw ConfigError("eval_times must be strictly ascending");
    }
    if (eval_times[i] > budget + 1e-9) throw ConfigError("eval_times must not exceed budget");
  }
  if (planner == PlannerKind::kPolicy && checkpoint.empty()) {
    throw ConfigError("the policy planner needs a checkpoint");
  }
  EnvConfig e = env;
  e.budget = budget;
  e.validate();
  field.validate();
  mcts.validate();
}

std::uint64_t trial_field_seed(std::uint64_t seed_base, std::size_t trial) {
  return derive_seed(seed_base, 101, trial);
}
std::uint64_t trial_env_seed(std::uint64_t seed_base, std::size_t trial) {
  return derive_seed(seed_base, 102, trial);
}
std::uint64_t trial_planner_seed(std::uint64_t seed_base, std::size_t trial) {
  return derive_seed(seed_base, 103, trial);
}

std::optional<std::size_t> PolicyPlanner::choose(const Environment& env) {
  if (env.done()) return std::nullopt;
  const Observation obs = env.observe();
  const DecodeOutput out = policy_forward(obs, env.roadmap(), ckpt_->params, ckpt_->cfg);
  std::size_t pick = out.allowed.front();
  if (sample_) {
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng_);
    double cum = 0.0;
    pick = out.allowed.back();
    for (std::size_t j : out.allowed) {
      cum += out.probs[j];
      if (u < cum) {
        pick = j;
        break;
      }
    }
  } else {
    for (std::size_t j : out.allowed) {
      if (out.probs[j] > out.probs[pick]) pick = j;
    }
  }
  return obs.neighbors[pick];
}

std::unique_ptr<Planner> make_planner(const ExperimentConfig& cfg, std::size_t trial,
                                      std::shared_ptr<const Checkpoint> policy) {
  const std::uint64_t seed = trial_planner_seed(cfg.seed_base, trial);
  switch (cfg.planner) {
    case PlannerKind::kPolicy:
      if (!policy) throw ConfigError("the policy planner needs a loaded checkpoint");
      return std::make_unique<PolicyPlanner>(std::move(policy), cfg.policy_sampling, seed);
    case PlannerKind::kRandom: return std::make_unique<RandomPlanner>(seed);
    case PlannerKind::kCoverage: return std::make_unique<CoveragePlanner>(cfg.coverage_altitude);
    case PlannerKind::kMcts: return std::make_unique<MctsPlanner>(cfg.mcts, seed);
  }
  throw ConfigError("unknown planner");
}

std::vector<double> report_times(const ExperimentConfig& cfg) {
  std::vector<double> t{0.0};
  for (double x : cfg.eval_times) {
    if (x > 0.0) t.push_back(x);
  }
  return t;
}

namespace {

struct EvalWorld {
  std::shared_ptr<const Roadmap> roadmap;
  std::shared_ptr<const EnvContext> ctx;
};

EvalWorld make_eval_world(const ExperimentConfig& cfg, std::size_t k_pe) {
  RoadmapConfig rc;
  rc.altitudes = cfg.altitudes;
  rc.k = cfg.roadmap_k;
  rc.k_pe = k_pe;
  EvalWorld w;
  w.roadmap = std::make_shared<const Roadmap>(
      build_roadmap({cfg.map_width, cfg.map_height, cfg.field.resolution}, rc));
  EnvConfig env = cfg.env;
  env.budget = cfg.budget;
  w.ctx = make_context(w.roadmap, env);
  return w;
}

std::shared_ptr<const Checkpoint> load_policy(const ExperimentConfig& cfg) {
  if (cfg.planner != PlannerKind::kPolicy) return nullptr;
  if (!fs::exists(cfg.checkpoint)) {
    throw ConfigError("checkpoint not found: " + cfg.checkpoint.string());
  }
  Checkpoint ck = load_checkpoint(cfg.checkpoint);
  ck.params = snapshot(ck.params);
  return std::make_shared<const Checkpoint>(std::move(ck));
}

std::size_t pe_dim(const std::shared_ptr<const Checkpoint>& policy) {
  return policy ? policy->cfg.k_pe : NetConfig{}.k_pe;
}

std::vector<MetricRow> run_trial_in(const ExperimentConfig& cfg, const EvalWorld& world,
                                    std::size_t trial,
                                    const std::shared_ptr<const Checkpoint>& policy) {
  auto truth = std::make_shared<const GroundTruthField>(
      generate_field(cfg.map_width, cfg.map_height, trial_field_seed(cfg.seed_base, trial),
                     cfg.field));
  Environment env(world.ctx, truth, trial_env_seed(cfg.seed_base, trial));
  env.set_record_metrics(false);
  auto planner = make_planner(cfg, trial, policy);
  const std::string name(planner_name(cfg.planner));

  CellSet interesting;
  for (std::size_t i = 0; i < truth->size(); ++i) {
    if (truth->values[i] >= cfg.env.roi.mu_th) interesting.push_back(i);
  }
  if (interesting.empty()) {
    interesting.resize(truth->size());
    std::iota(interesting.begin(), interesting.end(), std::size_t{0});
  }
  const BeliefState& prior = world.ctx->prior;
  const double tr0 = trace_over(prior, interesting);
  const std::vector<double> prior_mean = prior.clamped_mean();

  std::vector<MetricRow> rows;
  auto record = [&](double t) {
    const BeliefState& b = env.state().belief;
    const CellSet roi = env.current_roi();
    const double rmse0 = rmse_in_roi(prior_mean, *truth, roi);
    const double rmse_t = rmse_in_roi(b.clamped_mean(), *truth, roi);
    MetricRow r;
    r.trial = trial;
    r.planner = name;
    r.time_s = t;
    r.uncertainty_reduction_pct = tr0 > 0.0 ? (tr0 - trace_over(b, interesting)) / tr0 * 100.0 : 0.0;
    r.rmse_reduction_pct = rmse0 > 0.0 ? (rmse0 - rmse_t) / rmse0 * 100.0 : 0.0;
    rows.push_back(r);
  };

  const auto times = report_times(cfg);
  std::size_t next = 0;
  double runtime = 0.0;
  std::size_t decisions = 0;
  while (!env.done()) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto action = planner->choose(env);
    runtime += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    ++decisions;
    if (!action) break;
    const double arrival = env.elapsed() + env.edge_cost(env.state().current_node, *action);
    while (next < times.size() && times[next] < arrival - 1e-9) record(times[next++]);
    env.step(*action);
  }
  while (next < times.size()) record(times[next++]);

  const double mean_runtime =
      cfg.measure_runtime && decisions > 0 ? runtime / static_cast<double>(decisions) : 0.0;
  for (auto& r : rows) r.decision_runtime_s = mean_runtime;
  return rows;
}

std::string num(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_num(std::string_view s, const std::string& where) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw FormatError(where + ": not a number: '" + std::string(s) + "'");
  }
  return v;
}

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + path.string());
  return out;
}

}  // namespace

std::vector<MetricRow> run_trial(const ExperimentConfig& cfg, std::size_t trial,
                                 std::shared_ptr<const Checkpoint> policy) {
  cfg.validate();
  const EvalWorld world = make_eval_world(cfg, pe_dim(policy));
  return run_trial_in(cfg, world, trial, policy);
}

double sample_std(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

std::vector<SummaryRow> summarize(const std::vector<MetricRow>& rows) {
  struct Acc {
    std::vector<double> unc, rmse, runtime;
  };
  std::vector<std::string> order;
  std::map<std::string, std::map<double, Acc>> groups;
  for (const auto& r : rows) {
    if (!groups.count(r.planner)) order.push_back(r.planner);
    Acc& a = groups[r.planner][r.time_s];
    a.unc.push_back(r.uncertainty_reduction_pct);
    a.rmse.push_back(r.rmse_reduction_pct);
    a.runtime.push_back(r.decision_runtime_s);
  }
  auto mean = [](const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  };
  std::vector<SummaryRow> out;
  for (const auto& p : order) {
    for (const auto& [t, a] : groups[p]) {
      SummaryRow s;
      s.planner = p;
      s.time_s = t;
      s.trials = a.unc.size();
      s.uncertainty_mean = mean(a.unc);
      s.uncertainty_std = sample_std(a.unc);
      s.rmse_mean = mean(a.rmse);
      s.rmse_std = sample_std(a.rmse);
      s.runtime_mean = mean(a.runtime);
      out.push_back(s);
    }
  }
  return out;
}

fs::path summary_path(const fs::path& csv_path) {
  return csv_path.parent_path() / (csv_path.stem().string() + "_summary.csv");
}

void write_metric_csv(const fs::path& path, const std::vector<MetricRow>& rows) {
  std::ofstream out = open_out(path);
  out << kMetricHeader << '\n';
  for (const auto& r : rows) {
    out << r.trial << ',' << r.planner << ',' << num(r.time_s) << ','
        << num(r.uncertainty_reduction_pct) << ',' << num(r.rmse_reduction_pct) << ','
        << num(r.decision_runtime_s) << '\n';
  }
}

std::vector<MetricRow> read_metric_csv(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kMetricHeader) {
    throw FormatError(path.string() + ": header does not match the metric schema");
  }
  std::vector<MetricRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(lineno);
    const auto f = split_csv(line);
    if (f.size() != 6) throw FormatError(where + ": expected 6 fields");
    MetricRow r;
    const double trial = parse_num(f[0], where);
    if (trial < 0 || trial != std::floor(trial)) throw FormatError(where + ": bad trial index");
    r.trial = static_cast<std::size_t>(trial);
    r.planner = std::string(f[1]);
    r.time_s = parse_num(f[2], where);
    r.uncertainty_reduction_pct = parse_num(f[3], where);
    r.rmse_reduction_pct = parse_num(f[4], where);
    r.decision_runtime_s = parse_num(f[5], where);
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_summary_csv(const fs::path& path, const std::vector<SummaryRow>& rows) {
  std::ofstream out = open_out(path);
  out << kSummaryHeader << '\n';
  for (const auto& s : rows) {
    out << s.planner << ',' << num(s.time_s) << ',' << s.trials << ','
        << num(s.uncertainty_mean) << ',' << num(s.uncertainty_std) << ','
        << num(s.rmse_mean) << ',' << num(s.rmse_std) << ',' << num(s.runtime_mean) << '\n';
  }
}

EvalResult run_eval(const ExperimentConfig& cfg, const std::optional<fs::path>& csv_path) {
  cfg.validate();
  const auto policy = load_policy(cfg);
  const EvalWorld world = make_eval_world(cfg, pe_dim(policy));

  std::vector<std::vector<MetricRow>> per_trial(cfg.trials);
  std::vector<std::exception_ptr> errors(cfg.trials);
  const std::size_t workers = std::min(cfg.workers, cfg.trials);
  auto job = [&](std::size_t w) {
    for (std::size_t t = w; t < cfg.trials; t += workers) {
      try {
        per_trial[t] = run_trial_in(cfg, world, t, policy);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    job(0);
  } else {
    std::vector<std::thread> threads;
    for (std::size_t w = 0; w < workers; ++w) threads.emplace_back(job, w);
    for (auto& th : threads) th.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  EvalResult res;
  for (auto& rows : per_trial) {
    for (auto& r : rows) res.rows.push_back(std::move(r));
  }
  res.summary = summarize(res.rows);
  if (csv_path) {
    write_metric_csv(*csv_path, res.rows);
    write_summary_csv(summary_path(*csv_path), res.summary);
  }
  for (const auto& s : res.summary) {
    spdlog::info("{} t={}s uncertainty {:.2f}% (sd {:.2f}) rmse {:.2f}% runtime {:.4f}s",
                 s.planner, s.time_s, s.uncertainty_mean, s.uncertainty_std, s.rmse_mean,
                 s.runtime_mean);
  }
  return res;
}

std::vector<fs::path> emit_plot_data(const std::vector<fs::path>& csv_paths,
                                     const fs::path& out_dir) {
  if (csv_paths.empty()) throw ConfigError("plot: no input CSV files");
  std::vector<MetricRow> rows;
  for (const auto& p : csv_paths) {
    auto r = read_metric_csv(p);
    rows.insert(rows.end(), r.begin(), r.end());
  }
  const auto summary = summarize(rows);
  std::map<std::string, std::vector<SummaryRow>> by_planner;
  std::vector<std::string> order;
  for (const auto& s : summary) {
    if (!by_planner.count(s.planner)) order.push_back(s.planner);
    by_planner[s.planner].push_back(s);
  }
  std::vector<fs::path> out;
  for (const auto& p : order) {
    if (p.empty() || p.find_first_of("/\\") != std::string::npos) {
      throw FormatError("plot: invalid planner name '" + p + "'");
    }
    const fs::path path = out_dir / (p + "_series.csv");
    std::ofstream f = open_out(path);
    f << kSeriesHeader << '\n';
    for (const auto& s : by_planner[p]) {
      f << num(s.time_s) << ',' << num(s.uncertainty_mean) << ',' << num(s.uncertainty_std)
        << ',' << num(s.rmse_mean) << ',' << num(s.rmse_std) << '\n';
    }
    out.push_back(path);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Configuration files

Json load_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  try {
    return Json::parse(in, nullptr, true, true);
  } catch (const Json::parse_error& e) {
    throw ConfigError("invalid JSON in " + path.string() + ": " + e.what());
  }
}

void apply_override(Json& doc, std::string_view assignment) {
  const std::size_t eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw ConfigError("override must look like key.path=value: " + std::string(assignment));
  }
  const std::string key(assignment.substr(0, eq));
  const std::string raw(assignment.substr(eq + 1));
  Json value;
  try {
    value = Json::parse(raw);
  } catch (const Json::parse_error&) {
    value = raw;
  }
  Json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? dot : dot - start);
    if (part.empty()) throw ConfigError("empty component in override key " + key);
    if (!node->is_object()) {
      if (!node->is_null()) throw ConfigError("override " + key + " descends into a non-object");
      *node = Json::object();
    }
    node = &(*node)[part];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  *node = std::move(value);
}

namespace {

// Reads the keys of one object, rejecting unknown ones.
class Section {
 public:
  Section(const Json& doc, std::string name) : name_(std::move(name)) {
    if (doc.contains(name_)) {
      obj_ = &doc.at(name_);
      if (!obj_->is_object()) throw ConfigError("config section '" + name_ + "' must be an object");
    }
  }
  Section(const Json* obj, std::string name) : obj_(obj), name_(std::move(name)) {
    if (obj_ && !obj_->is_object()) throw ConfigError("config section '" + name_ + "' must be an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!obj_ || !obj_->contains(key)) return;
    try {
      out = obj_->at(key).get<T>();
    } catch (const Json::exception& e) {
      throw ConfigError("config key " + name_ + "." + key + ": " + e.what());
    }
    if constexpr (std::is_unsigned_v<T>) {
      if (obj_->at(key).is_number_integer() && obj_->at(key).get<long long>() < 0) {
        throw ConfigError("config key " + name_ + "." + key + " must be >= 0");
      }
    }
  }

  Section sub(const char* key) {
    seen_.insert(key);
    const Json* o = obj_ && obj_->contains(key) ? &obj_->at(key) : nullptr;
    return Section(o, name_ + "." + key);
  }

  void finish() const {
    if (!obj_) return;
    for (const auto& [k, v] : obj_->items()) {
      if (!seen_.count(k)) throw ConfigError("unknown config key " + name_ + "." + k);
    }
  }

 private:
  const Json* obj_ = nullptr;
  std::string name_;
  std::set<std::string> seen_;
};

void check_top_level(const Json& doc) {
  if (!doc.is_object()) throw ConfigError("config root must be an object");
  static const std::set<std::string> known{"map", "env", "field", "net", "ppo",
                                           "train", "eval", "mcts"};
  for (const auto& [k, v] : doc.items()) {
    if (!known.count(k)) throw ConfigError("unknown config section '" + k + "'");
  }
}

struct MapSettings {
  std::size_t width = 10, height = 10, roadmap_k = 20;
  double resolution = 2.5;
  std::vector<double> altitudes{8.0, 14.0};
};

MapSettings read_map(const Json& doc) {
  MapSettings m;
  Section s(doc, "map");
  s.get("width", m.width);
  s.get("height", m.height);
  s.get("resolution", m.resolution);
  s.get("altitudes", m.altitudes);
  s.get("roadmap_k", m.roadmap_k);
  s.finish();
  return m;
}

EnvConfig read_env(const Json& doc) {
  EnvConfig e;
  Section s(doc, "env");
  s.get("budget", e.budget);
  s.get("speed", e.speed);
  s.get("measurement_interval", e.measurement_interval);
  std::vector<double> start{e.start_position.x, e.start_position.y, e.start_position.z};
  s.get("start_position", start);
  if (start.size() != 3) throw ConfigError("env.start_position must have 3 entries");
  e.start_position = {start[0], start[1], start[2]};
  std::string mode = "mean_std";
  s.get("node_uncertainty", mode);
  if (mode == "mean_std") {
    e.node_uncertainty = NodeUncertainty::kMeanStd;
  } else if (mode == "footprint_trace") {
    e.node_uncertainty = NodeUncertainty::kFootprintTrace;
  } else {
    throw ConfigError("env.node_uncertainty must be mean_std or footprint_trace");
  }
  Section roi = s.sub("roi");
  roi.get("mu_th", e.roi.mu_th);
  roi.get("beta", e.roi.beta);
  roi.finish();
  Section sensor = s.sub("sensor");
  sensor.get("a", e.sensor.a);
  sensor.get("b", e.sensor.b);
  sensor.get("fov_half_angle_deg", e.sensor.fov_half_angle_deg);
  sensor.get("fov_scale_altitude", e.sensor.fov_scale_altitude);
  sensor.get("fov_scale_factor", e.sensor.fov_scale_factor);
  sensor.finish();
  Section gp = s.sub("gp");
  gp.get("length_scale", e.gp.length_scale);
  gp.get("signal_variance", e.gp.signal_variance);
  gp.get("noise_variance", e.gp.noise_variance);
  gp.finish();
  s.finish();
  return e;
}

FieldGenConfig read_field(const Json& doc, double resolution) {
  FieldGenConfig f;
  Section s(doc, "field");
  s.get("min_hotspots", f.min_hotspots);
  s.get("max_hotspots", f.max_hotspots);
  s.get("min_radius_frac", f.min_radius_frac);
  s.get("max_radius_frac", f.max_radius_frac);
  s.get("p_high", f.p_high);
  s.get("p_low", f.p_low);
  s.finish();
  f.resolution = resolution;
  return f;
}

MctsConfig read_mcts(const Json& doc) {
  MctsConfig m;
  Section s(doc, "mcts");
  s.get("iterations", m.iterations);
  s.get("ucb_c", m.ucb_c);
  s.get("pw_c", m.pw_c);
  s.get("pw_alpha", m.pw_alpha);
  s.get("rollout_depth", m.rollout_depth);
  s.get("gamma", m.gamma);
  s.finish();
  return m;
}

}  // namespace

TrainConfig train_config_from_json(const Json& doc) {
  check_top_level(doc);
  TrainConfig c;
  const MapSettings m = read_map(doc);
  c.map_width = m.width;
  c.map_height = m.height;
  c.roadmap_k = m.roadmap_k;
  c.altitudes = m.altitudes;
  c.env = read_env(doc);
  c.field = read_field(doc, m.resolution);

  Section net(doc, "net");
  net.get("embed_dim", c.net.embed_dim);
  net.get("heads", c.net.heads);
  net.get("k_pe", c.net.k_pe);
  net.get("logit_clip", c.net.logit_clip);
  net.get("ff_hidden", c.net.ff_hidden);
  net.finish();

  Section ppo(doc, "ppo");
  ppo.get("clip_eps", c.ppo.clip_eps);
  ppo.get("lr", c.ppo.lr);
  ppo.get("gamma", c.ppo.gamma);
  ppo.get("batch_size", c.ppo.batch_size);
  ppo.get("ppo_iters", c.ppo.ppo_iters);
  ppo.get("workers", c.ppo.workers);
  ppo.get("value_coef", c.ppo.value_coef);
  ppo.get("entropy_coef", c.ppo.entropy_coef);
  ppo.get("adam_beta1", c.ppo.adam_beta1);
  ppo.get("adam_beta2", c.ppo.adam_beta2);
  ppo.get("adam_eps", c.ppo.adam_eps);
  ppo.get("normalize_advantages", c.ppo.normalize_advantages);
  ppo.finish();

  Section train(doc, "train");
  train.get("total_episodes", c.total_episodes);
  train.get("checkpoint_interval", c.checkpoint_interval);
  train.get("random_start", c.random_start);
  train.get("seed", c.seed);
  std::string out_dir;
  train.get("out_dir", out_dir);
  train.finish();

  c.validate();
  return c;
}

ExperimentConfig experiment_config_from_json(const Json& doc) {
  check_top_level(doc);
  ExperimentConfig c;
  const MapSettings m = read_map(doc);
  c.map_width = m.width;
  c.map_height = m.height;
  c.roadmap_k = m.roadmap_k;
  c.altitudes = m.altitudes;
  c.env = read_env(doc);
  c.field = read_field(doc, m.resolution);
  c.mcts = read_mcts(doc);

  Section ev(doc, "eval");
  ev.get("trials", c.trials);
  ev.get("budget", c.budget);
  std::string planner(planner_name(c.planner));
  ev.get("planner", planner);
  c.planner = parse_planner(planner);
  std::string ckpt;
  ev.get("checkpoint", ckpt);
  c.checkpoint = ckpt;
  ev.get("eval_times", c.eval_times);
  ev.get("seed_base", c.seed_base);
  ev.get("workers", c.workers);
  ev.get("coverage_altitude", c.coverage_altitude);
  ev.get("policy_sampling", c.policy_sampling);
  ev.get("measure_runtime", c.measure_runtime);
  std::string out;
  ev.get("out", out);
  ev.finish();

  c.validate();
  return c;
}

InspectOutputs inspect_map(const ExperimentConfig& cfg, std::uint64_t seed,
                           const fs::path& out_dir) {
  cfg.validate();
  fs::create_directories(out_dir);
  const EvalWorld world = make_eval_world(cfg, NetConfig{}.k_pe);
  const GroundTruthField truth =
      generate_field(cfg.map_width, cfg.map_height, seed, cfg.field);
  InspectOutputs o{out_dir / "field.grid", out_dir / "roadmap.edges", out_dir / "prior_mean.grid",
                   out_dir / "prior_cov.bin"};
  save_field(o.grid.string(), truth);
  {
    std::ofstream e = open_out(o.edges);
    write_edge_list(e, *world.roadmap);
  }
  save_belief(o.mean.string(), o.covariance.string(), world.roadmap->grid, world.ctx->prior);
  spdlog::info("map {}x{}: {} roadmap nodes, {} cells", cfg.map_width, cfg.map_height,
               world.roadmap->size(), truth.size());
  return o;
}

}  // namespace ipp3d
