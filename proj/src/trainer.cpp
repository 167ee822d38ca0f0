#include "ipp3d/trainer.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "ipp3d/diffmath/ops.hpp"
#include "ipp3d/errors.hpp"
#include "ipp3d/seeding.hpp"

namespace ipp3d {

using dm::Tensor;

void PpoConfig::validate() const {
  if (!(clip_eps > 0.0 && clip_eps < 1.0)) throw ConfigError("clip_eps must be in (0,1)");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("gamma must be in (0,1]");
  if (workers < 1) throw ConfigError("workers must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (ppo_iters < 1) throw ConfigError("ppo_iters must be >= 1");
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("lr must be finite and >= 0");
  if (!(value_coef >= 0.0) || !(entropy_coef >= 0.0)) {
    throw ConfigError("loss coefficients must be >= 0");
  }
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw ConfigError("Adam betas must be in [0,1)");
  }
  if (!(adam_eps > 0.0)) throw ConfigError("adam_eps must be > 0");
}

void TrainConfig::validate() const {
  ppo.validate();
  net.validate();
  env.validate();
  field.validate();
  if (map_width < 2 || map_height < 2) throw ConfigError("map must be at least 2 x 2");
  if (altitudes.empty()) throw ConfigError("at least one altitude level is required");
  if (total_episodes < 1) throw ConfigError("total_episodes must be >= 1");
  if (checkpoint_interval < 1) throw ConfigError("checkpoint_interval must be >= 1");
}

double td_advantage(double reward, double value, double next_value, double gamma,
                    bool done) {
  return reward + (done ? 0.0 : gamma * next_value) - value;
}

void compute_advantages(std::vector<StepRecord>& records, double gamma) {
  const std::size_t n = records.size();
  for (std::size_t i = 0; i < n; ++i) {
    const bool has_next = i + 1 < n && records[i + 1].episode == records[i].episode;
    const double next_v = has_next ? records[i + 1].value : 0.0;
    const bool terminal = records[i].done || !has_next;
    records[i].advantage =
        td_advantage(records[i].reward, records[i].value, next_v, gamma, terminal);
  }
  double g = 0.0;
  for (std::size_t i = n; i-- > 0;) {
    const bool last = i + 1 == n || records[i + 1].episode != records[i].episode;
    g = records[i].reward + (last ? 0.0 : gamma * g);
    records[i].ret = g;
  }
}

void normalize_advantages(std::vector<StepRecord>& records) {
  const std::size_t n = records.size();
  if (n < 2) return;
  double mean = 0.0;
  for (const auto& r : records) mean += r.advantage;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (const auto& r : records) var += (r.advantage - mean) * (r.advantage - mean);
  const double sd = std::sqrt(var / static_cast<double>(n));
  if (!(sd > 0.0)) return;
  for (auto& r : records) r.advantage = (r.advantage - mean) / sd;
}

double clipped_surrogate(double ratio, double advantage, double eps) {
  return std::min(ratio * advantage,
                  std::clamp(ratio, 1.0 - eps, 1.0 + eps) * advantage);
}

SampleLoss sample_loss(const StepRecord& rec, const std::vector<double>& pe,
                       std::size_t nodes, const PolicyParams& params,
                       const NetConfig& net, const PpoConfig& cfg) {
  NodeInputs in;
  in.count = nodes;
  in.features = rec.features;
  in.pe = pe;
  const DecodeOutput out =
      policy_forward(in, rec.current, rec.neighbors, rec.affordable, params, net);
  const auto it = std::find(out.allowed.begin(), out.allowed.end(), rec.action);
  if (it == out.allowed.end()) throw TrainingError("stored action is not allowed");
  const std::size_t col = static_cast<std::size_t>(it - out.allowed.begin());

  const Tensor lp = dm::slice_cols(out.log_probs, col, 1);
  const Tensor ratio = dm::exp(dm::add_scalar(lp, -rec.old_log_prob));
  const double a = rec.advantage;
  const Tensor surr =
      dm::minimum(dm::scale(ratio, a),
                  dm::scale(dm::clamp(ratio, 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps), a));
  const Tensor probs = dm::exp(out.log_probs);
  const Tensor entropy = dm::neg(dm::sum(dm::mul(probs, out.log_probs)));
  const Tensor v_err = dm::square(dm::add_scalar(out.value, -rec.ret));

  SampleLoss s;
  s.total = dm::sub(dm::add(dm::neg(surr), dm::scale(v_err, cfg.value_coef)),
                    dm::scale(entropy, cfg.entropy_coef));
  s.policy = -surr.item();
  s.value = v_err.item();
  s.entropy = entropy.item();
  s.ratio = ratio.item();
  return s;
}

namespace {

std::string describe_sample(const StepRecord& r, const SampleLoss& s) {
  std::ostringstream os;
  os << std::setprecision(17) << "episode=" << r.episode << " current=" << r.current
     << " action=" << r.action << " old_log_prob=" << r.old_log_prob
     << " advantage=" << r.advantage << " return=" << r.ret << " policy=" << s.policy
     << " value=" << s.value << " entropy=" << s.entropy << " ratio=" << s.ratio;
  return os.str();
}

}  // namespace

Tensor ppo_loss(const RolloutBuffer& buffer, std::span<const std::size_t> batch,
                std::size_t nodes, const PolicyParams& params, const NetConfig& net,
                const PpoConfig& cfg, LossStats* stats) {
  if (batch.empty()) throw TrainingError("ppo_loss: empty batch");
  const double inv = 1.0 / static_cast<double>(batch.size());
  Tensor total;
  LossStats acc;
  for (std::size_t idx : batch) {
    const StepRecord& rec = buffer.records.at(idx);
    SampleLoss s = sample_loss(rec, *buffer.pe, nodes, params, net, cfg);
    if (!std::isfinite(s.total.item())) {
      throw TrainingError("non-finite loss: " + describe_sample(rec, s));
    }
    const Tensor term = dm::scale(s.total, inv);
    total = total.defined() ? dm::add(total, term) : term;
    acc.total += s.total.item() * inv;
    acc.policy += s.policy * inv;
    acc.value += s.value * inv;
    acc.entropy += s.entropy * inv;
  }
  if (stats) *stats = acc;
  return total;
}

AdamState AdamState::zeros_like(const PolicyParams& p) {
  AdamState s;
  for (const auto& t : p.tensors()) {
    s.m.emplace_back(t.size(), 0.0);
    s.v.emplace_back(t.size(), 0.0);
  }
  return s;
}

void adam_step(PolicyParams& params, AdamState& state, const PpoConfig& cfg) {
  auto tensors = params.tensors();
  if (state.m.size() != tensors.size()) state = AdamState::zeros_like(params);
  state.t += 1;
  const double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.t));
  for (std::size_t k = 0; k < tensors.size(); ++k) {
    Tensor& t = tensors[k];
    if (!t.has_grad()) continue;
    auto g = t.grad();
    auto w = t.values();
    auto& m = state.m[k];
    auto& v = state.v[k];
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = b1 * m[i] + (1.0 - b1) * g[i];
      v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      w[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.adam_eps);
    }
  }
}

PolicyParams snapshot(const PolicyParams& params) {
  PolicyParams s = params.clone();
  for (auto t : s.tensors()) t.set_requires_grad(false);
  return s;
}

namespace {

void run_worker(const PolicyParams& snap, const NetConfig& net, const Roadmap& roadmap,
                const EnvFactory& factory, const std::vector<EpisodeSpec>& specs,
                std::vector<StepRecord>& records, std::vector<double>& returns) {
  for (std::size_t e = 0; e < specs.size(); ++e) {
    Environment env = factory(specs[e]);
    std::mt19937_64 rng(specs[e].policy_seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    double episode_return = 0.0;
    while (!env.done()) {
      const Observation obs = env.observe();
      const DecodeOutput out = policy_forward(obs, roadmap, snap, net);
      const double u = unif(rng);
      double cum = 0.0;
      std::size_t pick = out.allowed.back();
      for (std::size_t j : out.allowed) {
        cum += out.probs[j];
        if (u < cum) {
          pick = j;
          break;
        }
      }
      const auto col = static_cast<std::size_t>(
          std::find(out.allowed.begin(), out.allowed.end(), pick) - out.allowed.begin());
      StepRecord rec;
      rec.episode = e;
      rec.features = node_inputs(obs.graph, roadmap).features;
      rec.current = obs.current_node;
      rec.neighbors = obs.neighbors;
      rec.affordable = obs.affordable;
      rec.action = pick;
      rec.old_log_prob = out.log_probs.at(0, col);
      rec.value = out.value.item();
      const StepResult res = env.step(obs.neighbors[pick]);
      rec.reward = res.reward;
      rec.done = res.done;
      episode_return += res.reward;
      records.push_back(std::move(rec));
    }
    returns.push_back(episode_return);
  }
}

}  // namespace

RolloutBuffer collect_rollouts(const PolicyParams& snap, const NetConfig& net,
                               const Roadmap& roadmap, const EnvFactory& factory,
                               const std::vector<std::vector<EpisodeSpec>>& per_worker) {
  if (per_worker.empty()) throw ConfigError("collect_rollouts: no workers");
  const std::size_t w = per_worker.size();
  std::vector<std::vector<StepRecord>> recs(w);
  std::vector<std::vector<double>> rets(w);
  std::vector<std::exception_ptr> errors(w);
  auto job = [&](std::size_t i) {
    try {
      run_worker(snap, net, roadmap, factory, per_worker[i], recs[i], rets[i]);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  if (w == 1) {
    job(0);
  } else {
    std::vector<std::thread> threads;
    threads.reserve(w);
    for (std::size_t i = 0; i < w; ++i) threads.emplace_back(job, i);
    for (auto& t : threads) t.join();
  }
  for (std::size_t i = 0; i < w; ++i) {
    if (!errors[i]) continue;
    std::ostringstream os;
    os << "rollout worker " << i << " failed";
    try {
      std::rethrow_exception(errors[i]);
    } catch (const std::exception& e) {
      os << ": " << e.what();
    }
    os << " (partial buffer:";
    for (std::size_t j = 0; j < w; ++j) os << " w" << j << "=" << recs[j].size();
    os << " records)";
    throw TrainingError(os.str());
  }

  RolloutBuffer buf;
  buf.pe = std::make_shared<const std::vector<double>>(roadmap.pe);
  std::size_t episode_offset = 0;
  for (std::size_t i = 0; i < w; ++i) {
    for (auto& r : recs[i]) {
      r.episode += episode_offset;
      buf.records.push_back(std::move(r));
    }
    episode_offset += rets[i].size();
    buf.episode_returns.insert(buf.episode_returns.end(), rets[i].begin(), rets[i].end());
  }
  return buf;
}

UpdateStats ppo_update(PolicyParams& params, AdamState& adam, const RolloutBuffer& buffer,
                       std::size_t nodes, const NetConfig& net, const PpoConfig& cfg,
                       std::mt19937_64& rng) {
  UpdateStats stats;
  const std::size_t n = buffer.records.size();
  if (n == 0) return stats;
  std::vector<std::size_t> order(n);
  std::size_t samples = 0;
  for (std::size_t epoch = 0; epoch < cfg.ppo_iters; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t end = std::min(n, start + cfg.batch_size);
      const double inv = 1.0 / static_cast<double>(end - start);
      params.zero_grad();
      // One graph per sample keeps peak memory at a single forward pass.
      for (std::size_t i = start; i < end; ++i) {
        const StepRecord& rec = buffer.records[order[i]];
        SampleLoss s = sample_loss(rec, *buffer.pe, nodes, params, net, cfg);
        if (!std::isfinite(s.total.item())) {
          throw TrainingError("non-finite loss: " + describe_sample(rec, s));
        }
        dm::scale(s.total, inv).backward();
        stats.mean.total += s.total.item();
        stats.mean.policy += s.policy;
        stats.mean.value += s.value;
        stats.mean.entropy += s.entropy;
        ++samples;
      }
      adam_step(params, adam, cfg);
      ++stats.steps;
      if (!params.all_finite()) {
        throw TrainingError("non-finite parameter after optimizer step " +
                            std::to_string(adam.t));
      }
    }
  }
  const double d = static_cast<double>(samples);
  stats.mean.total /= d;
  stats.mean.policy /= d;
  stats.mean.value /= d;
  stats.mean.entropy /= d;
  return stats;
}

EpisodeSpec training_episode_spec(const TrainConfig& cfg, std::size_t episode,
                                  std::size_t worker, std::size_t nodes) {
  EpisodeSpec s;
  s.field_seed = derive_seed(cfg.seed, 1, episode, worker);
  s.env_seed = derive_seed(cfg.seed, 2, episode, worker);
  s.policy_seed = derive_seed(cfg.seed, 3, episode, worker);
  if (cfg.random_start) s.start_node = derive_seed(cfg.seed, 4, episode, worker) % nodes;
  return s;
}

std::filesystem::path checkpoint_name(const std::filesystem::path& dir, std::size_t episode) {
  std::ostringstream os;
  os << "policy_ep" << std::setw(6) << std::setfill('0') << episode << ".bin";
  return dir / os.str();
}

std::filesystem::path optimizer_state_path(const std::filesystem::path& checkpoint) {
  return std::filesystem::path(checkpoint.string() + ".optim");
}

namespace {

void save_optimizer(const std::filesystem::path& path, const PolicyParams& params,
                    const AdamState& adam, std::size_t episode) {
  dm::NamedTensors out;
  out.emplace_back("train.episode", Tensor::scalar(static_cast<double>(episode)));
  out.emplace_back("adam.t", Tensor::scalar(static_cast<double>(adam.t)));
  const auto named = params.named();
  for (std::size_t k = 0; k < named.size(); ++k) {
    const auto& t = named[k].second;
    out.emplace_back("adam.m." + named[k].first, Tensor::from(t.rows(), t.cols(), adam.m[k]));
    out.emplace_back("adam.v." + named[k].first, Tensor::from(t.rows(), t.cols(), adam.v[k]));
  }
  dm::save_params(path, out);
}

std::size_t load_optimizer(const std::filesystem::path& path, const PolicyParams& params,
                           AdamState& adam) {
  const auto in = dm::load_params(path);
  const auto named = params.named();
  if (in.size() != 2 + 2 * named.size() || in[0].first != "train.episode" ||
      in[1].first != "adam.t") {
    throw FormatError("optimizer state " + path.string() + " does not match the network");
  }
  adam = AdamState::zeros_like(params);
  adam.t = static_cast<std::uint64_t>(in[1].second.item());
  for (std::size_t k = 0; k < named.size(); ++k) {
    const auto& m = in[2 + 2 * k].second;
    const auto& v = in[3 + 2 * k].second;
    if (m.size() != adam.m[k].size() || v.size() != adam.v[k].size()) {
      throw FormatError("optimizer state shape mismatch for " + named[k].first);
    }
    std::copy(m.values().begin(), m.values().end(), adam.m[k].begin());
    std::copy(v.values().begin(), v.values().end(), adam.v[k].begin());
  }
  return static_cast<std::size_t>(in[0].second.item());
}

void write_log_row(std::ostream& out, const TrainLogRow& r) {
  out << r.episode << ',' << std::setprecision(6) << std::fixed << r.wall_time_s << ','
      << std::setprecision(10) << std::defaultfloat << r.mean_return << ','
      << r.policy_loss << ',' << r.value_loss << ',' << r.entropy << '\n';
  out.flush();
}

}  // namespace

TrainResult train(const TrainConfig& cfg, const std::filesystem::path& out_dir,
                  const std::optional<std::filesystem::path>& resume_from) {
  cfg.validate();
  namespace fs = std::filesystem;
  fs::create_directories(out_dir / "checkpoints");

  RoadmapConfig rc;
  rc.altitudes = cfg.altitudes;
  rc.k = cfg.roadmap_k;
  rc.k_pe = cfg.net.k_pe;
  auto roadmap = std::make_shared<const Roadmap>(
      build_roadmap({cfg.map_width, cfg.map_height, cfg.field.resolution}, rc));
  auto ctx = make_context(roadmap, cfg.env);
  const std::size_t nodes = roadmap->size();

  TrainResult result;
  AdamState adam;
  std::size_t first_episode = 1;
  if (resume_from) {
    Checkpoint ck = load_checkpoint(*resume_from);
    if (!(ck.cfg == cfg.net)) {
      throw ConfigError("resume checkpoint network differs from the configured network");
    }
    result.params = std::move(ck.params);
    first_episode = load_optimizer(optimizer_state_path(*resume_from), result.params, adam) + 1;
  } else {
    result.params = init_params(cfg.net, derive_seed(cfg.seed, 0));
    adam = AdamState::zeros_like(result.params);
  }

  const fs::path log_path = out_dir / "train_log.csv";
  std::ofstream log;
  if (resume_from && fs::exists(log_path)) {
    log.open(log_path, std::ios::app | std::ios::binary);
  } else {
    log.open(log_path, std::ios::trunc | std::ios::binary);
    log << kTrainLogHeader << '\n';
  }
  if (!log) throw ConfigError("cannot write " + log_path.string());

  const FieldGenConfig field_cfg = cfg.field;
  const std::size_t w = cfg.map_width, h = cfg.map_height;
  EnvFactory factory = [ctx, field_cfg, w, h](const EpisodeSpec& spec) {
    auto truth =
        std::make_shared<const GroundTruthField>(generate_field(w, h, spec.field_seed, field_cfg));
    Environment env(ctx, truth, spec.env_seed);
    env.set_record_metrics(false);
    if (spec.start_node) env.reset(*spec.start_node);
    return env;
  };

  const auto t0 = std::chrono::steady_clock::now();
  std::size_t last_saved = 0;
  if (resume_from) {
    result.final_checkpoint = *resume_from;
    last_saved = first_episode - 1;
  }
  auto save = [&](std::size_t episode) {
    const fs::path p = checkpoint_name(out_dir / "checkpoints", episode);
    save_checkpoint(p, result.params, cfg.net);
    save_optimizer(optimizer_state_path(p), result.params, adam, episode);
    result.checkpoints.push_back(p);
    result.final_checkpoint = p;
    last_saved = episode;
  };

  for (std::size_t ep = first_episode; ep <= cfg.total_episodes; ++ep) {
    try {
      std::vector<std::vector<EpisodeSpec>> per_worker(cfg.ppo.workers);
      for (std::size_t k = 0; k < cfg.ppo.workers; ++k) {
        per_worker[k].push_back(training_episode_spec(cfg, ep, k, nodes));
      }
      RolloutBuffer buf =
          collect_rollouts(snapshot(result.params), cfg.net, *roadmap, factory, per_worker);
      compute_advantages(buf.records, cfg.ppo.gamma);
      if (cfg.ppo.normalize_advantages) normalize_advantages(buf.records);
      std::mt19937_64 rng(derive_seed(cfg.seed, 5, ep));
      const UpdateStats us =
          ppo_update(result.params, adam, buf, nodes, cfg.net, cfg.ppo, rng);

      TrainLogRow row;
      row.episode = ep;
      row.wall_time_s =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      row.mean_return =
          std::accumulate(buf.episode_returns.begin(), buf.episode_returns.end(), 0.0) /
          static_cast<double>(buf.episode_returns.size());
      row.policy_loss = us.mean.policy;
      row.value_loss = us.mean.value;
      row.entropy = us.mean.entropy;
      write_log_row(log, row);
      result.log.push_back(row);
      spdlog::info("episode {} return {:.4f} policy {:.4f} value {:.4f} entropy {:.4f}", ep,
                   row.mean_return, row.policy_loss, row.value_loss, row.entropy);
    } catch (const TrainingError& e) {
      std::ofstream diag(out_dir / "nan_diagnostic.txt", std::ios::trunc);
      diag << "episode " << ep << "\n" << e.what() << "\n";
      if (last_saved > 0) diag << "last good checkpoint: " << result.final_checkpoint << "\n";
      spdlog::error("training halted at episode {}: {}", ep, e.what());
      throw;
    }
    if (ep % cfg.checkpoint_interval == 0 || ep == cfg.total_episodes) save(ep);
  }
  return result;
}

}  // namespace ipp3d
