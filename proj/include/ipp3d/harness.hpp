#pragma once

// Configuration loading, evaluation campaigns and metric/plot-data files.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ipp3d/baselines.hpp"
#include "ipp3d/trainer.hpp"

namespace ipp3d {

enum class PlannerKind { kPolicy, kRandom, kCoverage, kMcts };

std::string_view planner_name(PlannerKind k);
PlannerKind parse_planner(std::string_view name);  // ConfigError when unknown

struct ExperimentConfig {
  std::size_t map_width = 10;
  std::size_t map_height = 10;
  std::size_t roadmap_k = 20;
  std::vector<double> altitudes{8.0, 14.0};
  EnvConfig env;  // env.budget is ignored; `budget` applies
  FieldGenConfig field;
  std::size_t trials = 4;
  double budget = 200.0;  // seconds
  PlannerKind planner = PlannerKind::kRandom;
  std::filesystem::path checkpoint;  // required for the policy planner
  std::vector<double> eval_times{50.0, 100.0, 150.0, 200.0};
  std::uint64_t seed_base = 0;
  std::size_t workers = 1;
  MctsConfig mcts;
  double coverage_altitude = 8.0;
  bool policy_sampling = false;  // false: most probable action
  bool measure_runtime = true;   // false writes 0 for decision_runtime_s

  void validate() const;
};

struct MetricRow {
  std::size_t trial = 0;
  std::string planner;
  double time_s = 0.0;
  double uncertainty_reduction_pct = 0.0;
  double rmse_reduction_pct = 0.0;
  double decision_runtime_s = 0.0;
};

inline constexpr const char* kMetricHeader =
    "trial,planner,time_s,uncertainty_reduction_pct,rmse_reduction_pct,decision_runtime_s";
inline constexpr const char* kSummaryHeader =
    "planner,time_s,trials,uncertainty_mean,uncertainty_std,rmse_mean,rmse_std,"
    "decision_runtime_mean_s";
inline constexpr const char* kSeriesHeader =
    "time_s,uncertainty_mean,uncertainty_std,rmse_mean,rmse_std";

struct SummaryRow {
  std::string planner;
  double time_s = 0.0;
  std::size_t trials = 0;
  double uncertainty_mean = 0.0;
  double uncertainty_std = 0.0;
  double rmse_mean = 0.0;
  double rmse_std = 0.0;
  double runtime_mean = 0.0;
};

// Per-trial seeds; each trial is reproducible from (seed_base, trial).
std::uint64_t trial_field_seed(std::uint64_t seed_base, std::size_t trial);
std::uint64_t trial_env_seed(std::uint64_t seed_base, std::size_t trial);
std::uint64_t trial_planner_seed(std::uint64_t seed_base, std::size_t trial);

// A planner for one trial. The policy planner needs a loaded checkpoint.
std::unique_ptr<Planner> make_planner(const ExperimentConfig& cfg, std::size_t trial,
                                      std::shared_ptr<const Checkpoint> policy);

// Acts with a trained policy: most probable affordable neighbor, or a sample
// when `sample` is set.
class PolicyPlanner : public Planner {
 public:
  PolicyPlanner(std::shared_ptr<const Checkpoint> ckpt, bool sample, std::uint64_t seed)
      : ckpt_(std::move(ckpt)), sample_(sample), rng_(seed) {}
  std::string name() const override { return "policy"; }
  std::optional<std::size_t> choose(const Environment& env) override;

 private:
  std::shared_ptr<const Checkpoint> ckpt_;
  bool sample_;
  std::mt19937_64 rng_;
};

// Sorted unique times {0} U eval_times.
std::vector<double> report_times(const ExperimentConfig& cfg);

// Runs one trial and returns one row per report time. Uncertainty reduction is
// over the cells the hidden field marks as interesting (every cell when there
// are none); RMSE reduction is over the belief ROI at the report time. Both are
// relative to the prior over the same cells.
std::vector<MetricRow> run_trial(const ExperimentConfig& cfg, std::size_t trial,
                                 std::shared_ptr<const Checkpoint> policy);

struct EvalResult {
  std::vector<MetricRow> rows;
  std::vector<SummaryRow> summary;
};

// All trials (in parallel when workers > 1), rows ordered by trial then time.
// Writes the metric CSV and, next to it, "<stem>_summary.csv".
EvalResult run_eval(const ExperimentConfig& cfg,
                    const std::optional<std::filesystem::path>& csv_path = std::nullopt);

std::filesystem::path summary_path(const std::filesystem::path& csv_path);

std::vector<SummaryRow> summarize(const std::vector<MetricRow>& rows);

void write_metric_csv(const std::filesystem::path& path, const std::vector<MetricRow>& rows);
std::vector<MetricRow> read_metric_csv(const std::filesystem::path& path);
void write_summary_csv(const std::filesystem::path& path, const std::vector<SummaryRow>& rows);

// Reads metric CSVs and writes one "<planner>_series.csv" per planner into
// out_dir. Throws FormatError on a header or field mismatch.
std::vector<std::filesystem::path> emit_plot_data(
    const std::vector<std::filesystem::path>& csv_paths, const std::filesystem::path& out_dir);

// Sample standard deviation with the n - 1 denominator; 0 for fewer than two
// values.
double sample_std(const std::vector<double>& v);

// ---------------------------------------------------------------------------
// Configuration files

using Json = nlohmann::json;

Json load_json(const std::filesystem::path& path);

// Applies "a.b.c=value"; value is parsed as JSON and falls back to a string.
void apply_override(Json& doc, std::string_view assignment);

TrainConfig train_config_from_json(const Json& doc);
ExperimentConfig experiment_config_from_json(const Json& doc);

struct InspectOutputs {
  std::filesystem::path grid;
  std::filesystem::path edges;
  std::filesystem::path mean;
  std::filesystem::path covariance;
};

// Writes the ground-truth grid, the roadmap edge list and the prior belief of
// the configured map (field drawn from `seed`) into out_dir.
InspectOutputs inspect_map(const ExperimentConfig& cfg, std::uint64_t seed,
                           const std::filesystem::path& out_dir);

}  // namespace ipp3d
