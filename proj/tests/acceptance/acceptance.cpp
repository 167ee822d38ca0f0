// Acceptance runner: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Training-based criteria write into the work directory.

#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <memory>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "gradcheck.hpp"
#include "ipp3d/baselines.hpp"
#include "ipp3d/belief.hpp"
#include "ipp3d/diffmath/ops.hpp"
#include "ipp3d/errors.hpp"
#include "ipp3d/harness.hpp"
#include "ipp3d/policynet.hpp"
#include "ipp3d/roadmap.hpp"
#include "ipp3d/sensor.hpp"
#include "ipp3d/simenv.hpp"
#include "ipp3d/trainer.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace ipp3d;
using dm::Tensor;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt_num(double v, int prec = 4) {
  std::ostringstream os;
  os.precision(prec);
  os << v;
  return os.str();
}

double max_abs(const RowMatrix& a, const RowMatrix& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

struct Context {
  fs::path work;
  fs::path configs;
  std::map<std::uint64_t, TrainResult> smoke_runs;
  std::optional<TrainResult> generalize_run;
  std::map<std::string, EvalResult> smoke_evals;

  Json config(const std::string& name) const { return load_json(configs / name); }

  const TrainResult& smoke(std::uint64_t seed) {
    auto it = smoke_runs.find(seed);
    if (it != smoke_runs.end()) return it->second;
    Json doc = config("smoke.json");
    doc["train"]["seed"] = seed;
    const auto cfg = train_config_from_json(doc);
    const fs::path out = work / ("smoke_seed" + std::to_string(seed));
    fs::remove_all(out);
    return smoke_runs.emplace(seed, train(cfg, out)).first->second;
  }

  const EvalResult& smoke_eval(const std::string& planner) {
    auto it = smoke_evals.find(planner);
    if (it != smoke_evals.end()) return it->second;
    Json doc = config("smoke.json");
    doc["eval"]["planner"] = planner;
    doc["eval"]["seed_base"] = 1000;
    if (planner == "policy") {
      doc["eval"]["checkpoint"] = smoke(1).final_checkpoint.string();
    } else {
      doc["eval"].erase("checkpoint");
    }
    const auto cfg = experiment_config_from_json(doc);
    return smoke_evals.emplace(planner, run_eval(cfg, work / ("smoke_" + planner + ".csv")))
        .first->second;
  }
};

double mean_at(const EvalResult& r, double t) {
  for (const auto& s : r.summary) {
    if (s.time_s == t) return s.uncertainty_mean;
  }
  throw StateError("no summary row at time " + std::to_string(t));
}

double mean_runtime(const EvalResult& r) {
  return r.summary.empty() ? 0.0 : r.summary.back().runtime_mean;
}

// ---------------------------------------------------------------------------

Outcome kalman_matches_batch(Context&) {
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  const int instances = 60;
  for (int t = 0; t < instances; ++t) {
    GpHyperparams hp;
    hp.length_scale = 1.0 + 6.0 * u(rng);
    hp.signal_variance = 0.2 + 2.0 * u(rng);
    hp.noise_variance = 0.01 + 1.5 * u(rng);
    const auto prior = init_prior({4, 4, 2.5}, hp);
    std::vector<std::size_t> cells(16);
    std::iota(cells.begin(), cells.end(), 0);
    std::shuffle(cells.begin(), cells.end(), rng);
    cells.resize(1 + rng() % 10);
    std::vector<double> z(cells.size());
    for (auto& v : z) v = u(rng);

    BeliefState seq = prior;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      kalman_update_inplace(seq, {{cells[i]}, {z[i]}, {hp.noise_variance}});
    }
    const auto batch = gp_condition(prior, cells, z, hp);
    worst = std::max({worst, oracle::max_abs_diff(seq.mu, batch.mu), max_abs(seq.cov, batch.cov)});
  }
  return {worst <= 1e-6,
          std::to_string(instances) + " instances, max deviation " + fmt_num(worst)};
}

Outcome trace_monotone(Context&) {
  auto rm = std::make_shared<Roadmap>(build_roadmap_graph({10, 10, 2.5}, {8.0, 14.0}, 20));
  auto ctx = make_context(rm, EnvConfig{});
  std::mt19937_64 rng(202);
  std::size_t checks = 0;
  double worst = 0.0;
  for (std::uint64_t ep = 0; ep < 100; ++ep) {
    auto truth = std::make_shared<GroundTruthField>(generate_field(10, 10, 5000 + ep));
    Environment env(ctx, truth, ep);
    env.reset(rng() % rm->size());
    while (!env.done()) env.step(random_policy(env, rng));
    const auto& log = env.state().metrics_log;
    for (std::size_t i = 1; i < log.size(); ++i) {
      worst = std::max(worst, log[i].full_trace - log[i - 1].full_trace);
      ++checks;
    }
  }
  return {worst <= 1e-9 && checks > 0,
          "100 episodes, " + std::to_string(checks) + " measurements, largest increase " +
              fmt_num(worst)};
}

// Values stay away from the kinks of relu (0) and clamp (+-0.6) so central
// differences are meaningful.
Tensor leaf(std::size_t r, std::size_t c, std::mt19937_64& rng, double lo = -1.5,
            double hi = 1.5) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(r * c);
  for (auto& x : v) {
    do {
      x = u(rng);
    } while (std::abs(x) < 0.05 || std::abs(std::abs(x) - 0.6) < 0.05);
  }
  return Tensor::from(r, c, std::move(v), true);
}

Tensor probe(const Tensor& y, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> w(y.size());
  for (auto& x : w) x = u(rng);
  return dm::sum(dm::mul(y, Tensor::from(y.rows(), y.cols(), std::move(w))));
}

Outcome gradient_suite(Context&) {
  std::mt19937_64 rng(303);
  std::uniform_int_distribution<std::size_t> dim(1, 8);
  std::vector<std::string> failed;
  std::size_t cases = 0;
  double worst = 0.0;
  auto check = [&](const std::string& name, std::vector<Tensor> leaves,
                   const std::function<Tensor()>& f) {
    const auto r = oracle::grad_check(std::move(leaves), f);
    ++cases;
    worst = std::max(worst, r.worst_rel);
    if (!r.ok && std::find(failed.begin(), failed.end(), name) == failed.end()) {
      failed.push_back(name);
    }
  };

  for (int round = 0; round < 6; ++round) {
    const std::size_t r = dim(rng), c = std::max<std::size_t>(2, dim(rng)), k = dim(rng);
    auto a = leaf(r, c, rng), b = leaf(r, c, rng), m = leaf(c, k, rng), n = leaf(k, c, rng);
    auto bias = leaf(1, c, rng), pos = leaf(r, c, rng, 0.2, 2.0), rows2 = leaf(2, c, rng);
    auto g = leaf(1, c, rng);
    check("matmul", {a, m}, [&] { return probe(dm::matmul(a, m), 1); });
    check("matmul_nt", {a, n}, [&] { return probe(dm::matmul_nt(a, n), 2); });
    check("transpose", {a}, [&] { return probe(dm::transpose(a), 3); });
    check("add", {a, b}, [&] { return probe(dm::add(a, b), 4); });
    check("sub", {a, b}, [&] { return probe(dm::sub(a, b), 5); });
    check("mul", {a, b}, [&] { return probe(dm::mul(a, b), 6); });
    check("add_row_bias", {a, bias}, [&] { return probe(dm::add_row_bias(a, bias), 7); });
    check("scale", {a}, [&] { return probe(dm::scale(a, -1.3), 8); });
    check("add_scalar", {a}, [&] { return probe(dm::add_scalar(a, 0.4), 9); });
    check("neg", {a}, [&] { return probe(dm::neg(a), 10); });
    check("relu", {a}, [&] { return probe(dm::relu(a), 11); });
    check("tanh", {a}, [&] { return probe(dm::tanh(a), 12); });
    check("exp", {a}, [&] { return probe(dm::exp(a), 13); });
    check("log", {pos}, [&] { return probe(dm::log(pos), 14); });
    check("square", {a}, [&] { return probe(dm::square(a), 15); });
    check("clamp", {a}, [&] { return probe(dm::clamp(a, -0.6, 0.6), 16); });
    check("minimum", {a, b}, [&] { return probe(dm::minimum(a, b), 17); });
    const std::vector<Tensor> cols{a, b}, rows{a, rows2};
    check("concat_cols", {a, b}, [&] { return probe(dm::concat_cols(cols), 18); });
    check("concat_rows", {a, rows2}, [&] { return probe(dm::concat_rows(rows), 19); });
    const std::vector<std::size_t> ridx{r - 1, 0, r - 1}, cidx{c - 1, 0, c - 1};
    check("gather_rows", {a}, [&] { return probe(dm::gather_rows(a, ridx), 20); });
    check("gather_cols", {a}, [&] { return probe(dm::gather_cols(a, cidx), 21); });
    check("slice_cols", {a}, [&] { return probe(dm::slice_cols(a, c / 2, c - c / 2), 22); });
    check("set_row", {a, bias}, [&] { return probe(dm::set_row(a, r / 2, bias), 23); });
    check("softmax_rows", {a}, [&] { return probe(dm::softmax_rows(a), 24); });
    check("log_softmax_rows", {a}, [&] { return probe(dm::log_softmax_rows(a), 25); });
    check("layer_norm", {a, g, bias}, [&] { return probe(dm::layer_norm(a, g, bias), 26); });
    check("sum", {a}, [&] { return dm::sum(a); });
    check("mean", {a}, [&] { return dm::mean(a); });
  }

  NetConfig net;
  net.embed_dim = 8;
  net.heads = 2;
  net.k_pe = 3;
  net.ff_hidden = 8;
  for (int round = 0; round < 3; ++round) {
    auto p = init_params(net, 40 + round);
    std::uniform_real_distribution<double> u(-0.6, 0.6);
    for (auto t : p.tensors()) {
      for (auto& v : t.values()) v = u(rng);
    }
    NodeInputs in;
    in.count = 7;
    in.features.resize(in.count * kNodeFeatures);
    in.pe.resize(in.count * net.k_pe);
    for (auto& v : in.features) v = u(rng);
    for (auto& v : in.pe) v = u(rng);
    const std::vector<std::size_t> nb{1, 3, 4, 6};
    const std::vector<std::uint8_t> mask{1, 1, 0, 1};
    check("policy forward+loss", p.tensors(), [&] {
      auto out = policy_forward(in, 2, nb, mask, p, net);
      auto probs = dm::exp(out.log_probs);
      auto entropy = dm::neg(dm::sum(dm::mul(probs, out.log_probs)));
      auto v_err = dm::square(dm::add_scalar(out.value, -0.3));
      auto pick = dm::slice_cols(out.log_probs, 1, 1);
      return dm::add(dm::sub(dm::scale(v_err, 0.5), dm::scale(entropy, 0.01)),
                     dm::scale(pick, -1.7));
    });
  }

  std::string detail = std::to_string(cases) + " checks, worst relative error above the 1e-8 absolute floor " + fmt_num(worst);
  for (const auto& f : failed) detail += "; failed " + f;
  return {failed.empty(), detail};
}

Outcome sensor_model(Context&) {
  const SensorConfig cfg;
  std::vector<std::string> problems;
  if (noise_variance(0.0, cfg) != 0.0) problems.push_back("noise_variance(0) != 0");
  double prev = noise_variance(0.0, cfg);
  for (int i = 1; i <= 100; ++i) {
    const double v = noise_variance(0.5 * i, cfg);
    if (!(v > prev)) {
      problems.push_back("noise not increasing at h=" + fmt_num(0.5 * i));
      break;
    }
    prev = v;
  }
  const GridGeometry grid{60, 60, 1.0};
  std::size_t prev_count = 0;
  for (int i = 1; i <= 100; ++i) {
    const double h = cfg.fov_scale_altitude * i / 101.0;
    const auto n = footprint_cells({30.0, 30.0, h}, grid, cfg).size();
    if (n < prev_count) {
      problems.push_back("footprint shrinks at h=" + fmt_num(h));
      break;
    }
    prev_count = n;
  }
  std::string detail = "100-point sweeps";
  for (const auto& p : problems) detail += "; " + p;
  return {problems.empty(), detail};
}

Outcome reward_bounds(Context&) {
  auto rm = std::make_shared<Roadmap>(build_roadmap_graph({10, 10, 2.5}, {8.0, 14.0}, 20));
  auto ctx = make_context(rm, EnvConfig{});
  std::mt19937_64 rng(505);
  std::size_t steps = 0, bad = 0;
  double lo = 1e300, hi = -1e300;
  for (std::uint64_t ep = 0; steps < 10000; ++ep) {
    auto truth = std::make_shared<GroundTruthField>(generate_field(10, 10, 7000 + ep));
    Environment env(ctx, truth, ep);
    env.reset(rng() % rm->size());
    while (!env.done() && steps < 10000) {
      const double r = env.step(random_policy(env, rng)).reward;
      ++steps;
      lo = std::min(lo, r);
      hi = std::max(hi, r);
      if (!(r >= 0.0 && r <= 10.0)) ++bad;
    }
  }
  return {bad == 0, std::to_string(steps) + " steps, reward range [" + fmt_num(lo) + ", " +
                        fmt_num(hi) + "], out of bounds " + std::to_string(bad)};
}

Outcome permutation_contract(Context&) {
  NetConfig net;
  net.embed_dim = 16;
  net.heads = 4;
  net.k_pe = 4;
  net.ff_hidden = 32;
  std::mt19937_64 rng(606);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  auto p = init_params(net, 6);
  for (auto t : p.tensors()) {
    for (auto& v : t.values()) v = 0.6 * u(rng);
  }
  double worst_pi = 0.0, worst_v = 0.0;
  for (int call = 0; call < 100; ++call) {
    NodeInputs in;
    in.count = 4 + rng() % 20;
    in.features.resize(in.count * kNodeFeatures);
    in.pe.resize(in.count * net.k_pe);
    for (auto& v : in.features) v = u(rng);
    for (auto& v : in.pe) v = u(rng);
    const std::size_t current = rng() % in.count;
    std::vector<std::size_t> nb;
    for (std::size_t i = 0; i < in.count; ++i) {
      if (i != current && rng() % 2 == 0) nb.push_back(i);
    }
    if (nb.empty()) nb.push_back((current + 1) % in.count);
    std::vector<std::uint8_t> mask(nb.size(), 1);
    for (std::size_t i = 1; i < nb.size(); ++i) mask[i] = rng() % 4 != 0;
    const auto base = policy_forward(in, current, nb, mask, p, net);
    std::vector<std::size_t> perm(nb.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<std::size_t> pnb(nb.size());
    std::vector<std::uint8_t> pmask(nb.size());
    for (std::size_t i = 0; i < nb.size(); ++i) {
      pnb[i] = nb[perm[i]];
      pmask[i] = mask[perm[i]];
    }
    const auto out = policy_forward(in, current, pnb, pmask, p, net);
    for (std::size_t i = 0; i < nb.size(); ++i) {
      worst_pi = std::max(worst_pi, std::abs(out.probs[i] - base.probs[perm[i]]));
    }
    worst_v = std::max(worst_v, std::abs(out.value.item() - base.value.item()));
  }
  return {worst_pi <= 1e-9 && worst_v <= 1e-9,
          "100 calls, max |dpi| " + fmt_num(worst_pi) + ", max |dV| " + fmt_num(worst_v)};
}

Outcome generalization(Context& c) {
  const Json doc = c.config("generalize.json");
  const auto tcfg = train_config_from_json(doc);
  const fs::path out = c.work / "generalize";
  fs::remove_all(out);
  const TrainResult run = train(tcfg, out);
  auto ckpt = std::make_shared<const Checkpoint>(load_checkpoint(run.final_checkpoint));

  // Distribution validity on the 800-node graph along full rollouts.
  const std::size_t side = 20;
  RoadmapConfig rc;
  rc.altitudes = tcfg.altitudes;
  rc.k = tcfg.roadmap_k;
  rc.k_pe = ckpt->cfg.k_pe;
  auto rm = std::make_shared<Roadmap>(build_roadmap({side, side, 2.5}, rc));
  EnvConfig ecfg = tcfg.env;
  auto ctx = make_context(rm, ecfg);
  std::size_t decisions = 0, invalid = 0;
  for (std::uint64_t ep = 0; ep < 2; ++ep) {
    auto truth = std::make_shared<GroundTruthField>(generate_field(side, side, 9100 + ep));
    Environment env(ctx, truth, ep);
    env.reset();
    while (!env.done()) {
      const auto obs = env.observe();
      const auto o = policy_forward(obs, *rm, ckpt->params, ckpt->cfg);
      double s = 0.0, best = -1.0;
      std::size_t arg = 0;
      bool ok = o.probs.size() == obs.neighbors.size() && std::isfinite(o.value.item());
      for (std::size_t i = 0; i < o.probs.size(); ++i) {
        ok = ok && std::isfinite(o.probs[i]) && o.probs[i] >= 0.0 &&
             (obs.affordable[i] || o.probs[i] == 0.0);
        s += o.probs[i];
        if (o.probs[i] > best) best = o.probs[i], arg = i;
      }
      ok = ok && std::abs(s - 1.0) <= 1e-9;
      ++decisions;
      if (!ok) ++invalid;
      env.step(obs.neighbors[arg]);
    }
  }
  if (rm->size() != 800) return {false, "20x20 graph has " + std::to_string(rm->size()) + " nodes"};

  Json ev = doc;
  ev["map"]["width"] = side;
  ev["map"]["height"] = side;
  ev["eval"]["trials"] = 20;
  ev["eval"]["seed_base"] = 2000;
  ev["eval"]["measure_runtime"] = false;
  ev["eval"]["planner"] = "policy";
  ev["eval"]["checkpoint"] = run.final_checkpoint.string();
  const auto pcfg = experiment_config_from_json(ev);
  const auto policy = run_eval(pcfg, c.work / "generalize_policy.csv");
  ev["eval"]["planner"] = "random";
  ev["eval"].erase("checkpoint");
  const auto random = run_eval(experiment_config_from_json(ev), c.work / "generalize_random.csv");
  const double pm = mean_at(policy, pcfg.budget), rmn = mean_at(random, pcfg.budget);
  return {invalid == 0 && pm > rmn,
          std::to_string(decisions) + " decisions on 800 nodes, invalid " +
              std::to_string(invalid) + "; reduction at " + fmt_num(pcfg.budget) +
              " s: policy " + fmt_num(pm) + "% vs random " + fmt_num(rmn) + "%"};
}

Outcome ordering(Context& c) {
  const double t = experiment_config_from_json(c.config("smoke.json")).budget;
  const double p = mean_at(c.smoke_eval("policy"), t);
  const double m = mean_at(c.smoke_eval("mcts"), t);
  const double r = mean_at(c.smoke_eval("random"), t);
  const double cov = mean_at(c.smoke_eval("coverage"), t);
  const bool pass = p >= r + 10.0 && m >= r && r >= cov;
  return {pass, "reduction at " + fmt_num(t) + " s over 20 trials: policy " + fmt_num(p) +
                    "%, mcts " + fmt_num(m) + "%, random " + fmt_num(r) + "%, coverage " +
                    fmt_num(cov) + "%"};
}

Outcome runtime(Context& c) {
  const double tp = mean_runtime(c.smoke_eval("policy"));
  const double tm = mean_runtime(c.smoke_eval("mcts"));

  const NetConfig net;  // full-size network
  const auto p = init_params(net, 9);
  RoadmapConfig rc;
  rc.k_pe = net.k_pe;
  auto rm = std::make_shared<Roadmap>(build_roadmap({15, 15, 2.5}, rc));
  auto ctx = make_context(rm, EnvConfig{});
  auto truth = std::make_shared<GroundTruthField>(generate_field(15, 15, 11));
  Environment env(ctx, truth, 1);
  env.reset();
  std::mt19937_64 rng(909);
  double total = 0.0;
  const int decisions = 20;
  for (int i = 0; i < decisions && !env.done(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto obs = env.observe();
    const auto out = policy_forward(obs, *rm, p, net);
    total += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    (void)out;
    env.step(random_policy(env, rng));
  }
  const double per = total / decisions;
  const bool pass = tp > 0.0 && tm >= 10.0 * tp && per < 0.05 && rm->size() == 450;
  return {pass, "per decision: policy " + fmt_num(tp * 1e3) + " ms, mcts " + fmt_num(tm * 1e3) +
                    " ms (" + fmt_num(tm / std::max(tp, 1e-12), 3) + "x); full network at " +
                    std::to_string(rm->size()) + " nodes " + fmt_num(per * 1e3) + " ms"};
}

Outcome learning_signal(Context& c) {
  int improved = 0;
  std::string detail;
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto& log = c.smoke(seed).log;
    if (log.size() < 40) return {false, "training log too short"};
    double first = 0.0, last = 0.0;
    for (std::size_t i = 0; i < 20; ++i) {
      first += log[i].mean_return / 20.0;
      last += log[log.size() - 20 + i].mean_return / 20.0;
    }
    if (last > first) ++improved;
    detail += (detail.empty() ? "" : ", ") + std::string("seed ") + std::to_string(seed) + " " +
              fmt_num(first) + " -> " + fmt_num(last);
  }
  return {improved >= 2, std::to_string(improved) + "/3 improved (" + detail + ")"};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Outcome determinism(Context& c) {
  std::vector<std::string> problems;

  Json tdoc = c.config("smoke.json");
  tdoc["train"]["total_episodes"] = 3;
  tdoc["train"]["checkpoint_interval"] = 1;
  tdoc["train"]["seed"] = 77;
  const auto tcfg = train_config_from_json(tdoc);
  const auto a = train(tcfg, c.work / "det_train_a");
  const auto b = train(tcfg, c.work / "det_train_b");
  std::size_t files = 0;
  for (std::size_t i = 0; i < a.checkpoints.size(); ++i) {
    for (const auto& [pa, pb] :
         {std::pair{a.checkpoints[i], b.checkpoints[i]},
          std::pair{manifest_path(a.checkpoints[i]), manifest_path(b.checkpoints[i])}}) {
      ++files;
      if (slurp(pa).empty() || slurp(pa) != slurp(pb)) problems.push_back(pa.filename().string());
    }
  }
  if (a.checkpoints.size() != 3 || b.checkpoints.size() != 3) problems.push_back("checkpoint count");

  for (const char* planner : {"random", "coverage", "mcts", "policy"}) {
    Json edoc = c.config("smoke.json");
    edoc["eval"]["planner"] = planner;
    edoc["eval"]["trials"] = 3;
    edoc["eval"]["workers"] = 2;
    edoc["eval"]["seed_base"] = 55;
    edoc["eval"]["measure_runtime"] = false;
    edoc["eval"]["checkpoint"] = a.final_checkpoint.string();
    if (std::string(planner) == "mcts") edoc["mcts"]["iterations"] = 40;
    const auto ecfg = experiment_config_from_json(edoc);
    const fs::path p1 = c.work / (std::string("det_") + planner + "_1.csv");
    const fs::path p2 = c.work / (std::string("det_") + planner + "_2.csv");
    run_eval(ecfg, p1);
    run_eval(ecfg, p2);
    files += 2;
    if (slurp(p1).empty() || slurp(p1) != slurp(p2)) problems.push_back(p1.filename().string());
    if (slurp(summary_path(p1)) != slurp(summary_path(p2))) {
      problems.push_back(summary_path(p1).filename().string());
    }
  }
  std::string detail = std::to_string(files) + " file pairs compared";
  for (const auto& p : problems) detail += "; differs: " + p;
  return {problems.empty(), detail};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  std::vector<int> only;
  std::string work = "acceptance_work";
  std::string configs = IPP3D_CONFIG_DIR;
  app.add_option("criteria", only, "Criteria to run (default: all)");
  app.add_option("--work", work, "Scratch directory for training runs and CSVs");
  app.add_option("--configs", configs, "Directory holding smoke.json and generalize.json");
  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(spdlog::level::warn);

  Context ctx;
  ctx.work = work;
  ctx.configs = configs;
  fs::create_directories(ctx.work);

  // Criterion 10 runs before 8 and 9 so their shared training run is cached.
  const std::vector<std::pair<int, std::function<Outcome(Context&)>>> criteria{
      {1, kalman_matches_batch}, {2, trace_monotone},       {3, gradient_suite},
      {4, sensor_model},         {5, reward_bounds},        {6, permutation_contract},
      {11, determinism},         {10, learning_signal},     {8, ordering},
      {9, runtime},              {7, generalization},
  };
  std::map<int, Outcome> results;
  for (const auto& [id, fn] : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn(ctx);
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    o.detail += " [" + fmt_num(secs, 3) + " s]";
    std::fprintf(stderr, "criterion %d finished in %.1f s\n", id, secs);
    results[id] = o;
  }
  bool all = true;
  for (const auto& [id, o] : results) {
    std::printf("criterion %2d: %s  %s\n", id, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    all = all && o.pass;
  }
  std::fflush(stdout);
  return all ? 0 : 1;
}
