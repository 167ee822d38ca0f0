#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "ipp3d/errors.hpp"
#include "ipp3d/harness.hpp"

namespace fs = std::filesystem;
using namespace ipp3d;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

Json load_with_overrides(const std::string& path, const std::vector<std::string>& sets) {
  Json doc = path.empty() ? Json::object() : load_json(path);
  for (const auto& s : sets) apply_override(doc, s);
  return doc;
}

std::string string_at(const Json& doc, const char* section, const char* key,
                      const std::string& fallback) {
  if (doc.contains(section) && doc[section].is_object() && doc[section].contains(key) &&
      doc[section][key].is_string()) {
    return doc[section][key].get<std::string>();
  }
  return fallback;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Informative path planning on 3D roadmaps: training, evaluation and data export"};
  app.require_subcommand(1);
  std::string log_level = "info";
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error or off")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));

  std::string config;
  std::vector<std::string> sets;

  auto* train = app.add_subcommand("train", "Train a policy with PPO");
  std::string train_out;
  std::optional<std::uint64_t> train_seed;
  std::optional<std::size_t> train_episodes;
  std::string resume;
  train->add_option("-c,--config", config, "JSON config file")->check(CLI::ExistingFile);
  train->add_option("--set", sets, "Override a config value, e.g. ppo.lr=3e-4");
  train->add_option("--out", train_out, "Output directory (default: train.out_dir or runs/train)");
  train->add_option("--seed", train_seed, "Training seed");
  train->add_option("--episodes", train_episodes, "Total training episodes");
  train->add_option("--resume", resume, "Checkpoint to resume from")->check(CLI::ExistingFile);

  auto* eval = app.add_subcommand("eval", "Evaluate a planner over seeded trials");
  std::uint64_t eval_seed = 0;
  std::string planner, checkpoint, eval_out;
  std::optional<std::size_t> trials, workers;
  std::optional<double> budget;
  eval->add_option("-c,--config", config, "JSON config file")->check(CLI::ExistingFile);
  eval->add_option("--set", sets, "Override a config value, e.g. eval.trials=20");
  eval->add_option("--seed", eval_seed, "Base seed of the trials")->required();
  eval->add_option("--planner", planner, "policy, random, coverage or mcts");
  eval->add_option("--checkpoint", checkpoint, "Policy checkpoint");
  eval->add_option("--trials", trials, "Number of trials");
  eval->add_option("--budget", budget, "Mission budget in seconds");
  eval->add_option("--workers", workers, "Parallel trial workers");
  eval->add_option("--out", eval_out, "Metric CSV path (default: eval.out or eval.csv)");

  auto* plot = app.add_subcommand("plot", "Write per-planner mean/std series from metric CSVs");
  std::vector<std::string> plot_inputs;
  std::string plot_out = ".";
  plot->add_option("csv", plot_inputs, "Metric CSV files")->required()->check(CLI::ExistingFile);
  plot->add_option("--out", plot_out, "Output directory");

  auto* inspect = app.add_subcommand("inspect-map", "Write the field grid, roadmap edges and prior");
  std::uint64_t inspect_seed = 0;
  std::string inspect_out = "map";
  inspect->add_option("-c,--config", config, "JSON config file")->check(CLI::ExistingFile);
  inspect->add_option("--set", sets, "Override a config value");
  inspect->add_option("--seed", inspect_seed, "Field seed");
  inspect->add_option("--out", inspect_out, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }
  spdlog::set_level(spdlog::level::from_str(log_level));

  try {
    if (train->parsed()) {
      Json doc = load_with_overrides(config, sets);
      if (train_seed) apply_override(doc, "train.seed=" + std::to_string(*train_seed));
      if (train_episodes) {
        apply_override(doc, "train.total_episodes=" + std::to_string(*train_episodes));
      }
      const TrainConfig cfg = train_config_from_json(doc);
      const fs::path out =
          train_out.empty() ? fs::path(string_at(doc, "train", "out_dir", "runs/train")) : fs::path(train_out);
      std::optional<fs::path> from;
      if (!resume.empty()) from = resume;
      const TrainResult res = ipp3d::train(cfg, out, from);
      std::cout << res.final_checkpoint.string() << '\n';
    } else if (eval->parsed()) {
      Json doc = load_with_overrides(config, sets);
      Json& ev = doc["eval"];
      if (ev.is_null()) ev = Json::object();
      ev["seed_base"] = eval_seed;
      if (!planner.empty()) ev["planner"] = planner;
      if (!checkpoint.empty()) ev["checkpoint"] = checkpoint;
      if (trials) ev["trials"] = *trials;
      if (budget) ev["budget"] = *budget;
      if (workers) ev["workers"] = *workers;
      const ExperimentConfig cfg = experiment_config_from_json(doc);
      const fs::path out =
          eval_out.empty() ? fs::path(string_at(doc, "eval", "out", "eval.csv")) : fs::path(eval_out);
      run_eval(cfg, out);
      std::cout << out.string() << '\n' << summary_path(out).string() << '\n';
    } else if (plot->parsed()) {
      std::vector<fs::path> in(plot_inputs.begin(), plot_inputs.end());
      for (const auto& p : emit_plot_data(in, plot_out)) std::cout << p.string() << '\n';
    } else if (inspect->parsed()) {
      const Json doc = load_with_overrides(config, sets);
      Json copy = doc;
      if (copy.contains("eval") && copy["eval"].is_object()) copy["eval"].erase("checkpoint");
      if (!copy.contains("eval")) copy["eval"] = Json::object();
      copy["eval"]["planner"] = "random";
      const auto o = inspect_map(experiment_config_from_json(copy), inspect_seed, inspect_out);
      for (const auto& p : {o.grid, o.edges, o.mean, o.covariance}) std::cout << p.string() << '\n';
    }
  } catch (const ConfigError& e) {
    spdlog::error("configuration error: {}", e.what());
    return kExitConfig;
  } catch (const FormatError& e) {
    spdlog::error("invalid input: {}", e.what());
    return kExitConfig;
  } catch (const TrainingError& e) {
    spdlog::error("numerical halt: {}", e.what());
    return kExitNumerical;
  } catch (const NumericalError& e) {
    spdlog::error("numerical halt: {}", e.what());
    return kExitNumerical;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitError;
  }
  return kExitOk;
}
