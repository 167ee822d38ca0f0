#pragma once

// PPO with one-step TD advantages, parallel episode collection and an Adam
// optimizer over PolicyParams.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ipp3d/groundtruth.hpp"
#include "ipp3d/policynet.hpp"
#include "ipp3d/roadmap.hpp"
#include "ipp3d/simenv.hpp"

namespace ipp3d {

struct PpoConfig {
  double clip_eps = 0.2;
  double lr = 1e-5;
  double gamma = 0.99;
  std::size_t batch_size = 128;
  std::size_t ppo_iters = 8;
  std::size_t workers = 5;
  double value_coef = 0.5;
  double entropy_coef = 0.01;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  // Rescale advantages to zero mean and unit variance over each collected
  // buffer before the update.
  bool normalize_advantages = false;

  void validate() const;
};

// One decision. Node features are stored instead of the belief; the
// positional encoding is shared through the buffer.
struct StepRecord {
  std::size_t episode = 0;  // index within the buffer
  std::vector<double> features;
  std::size_t current = 0;
  std::vector<std::size_t> neighbors;
  std::vector<std::uint8_t> affordable;
  std::size_t action = 0;  // position in neighbors
  double old_log_prob = 0.0;
  double reward = 0.0;
  double value = 0.0;
  bool done = false;
  double advantage = 0.0;
  double ret = 0.0;
};

struct RolloutBuffer {
  std::shared_ptr<const std::vector<double>> pe;
  std::vector<StepRecord> records;
  std::vector<double> episode_returns;  // undiscounted, one per episode
};

// A_t = r_t + gamma * V(s_{t+1}) * (1 - done_t) - V(s_t).
double td_advantage(double reward, double value, double next_value, double gamma,
                    bool done);
// Fills advantage (one-step TD, bootstrapping from the next record of the same
// episode) and ret (discounted reward-to-go) for every record.
void compute_advantages(std::vector<StepRecord>& records, double gamma);
// Shifts and scales the advantages to zero mean and unit variance (population
// variance); leaves them unchanged when there are fewer than two records or
// the spread is zero.
void normalize_advantages(std::vector<StepRecord>& records);

// min(r * A, clip(r, 1 - eps, 1 + eps) * A).
double clipped_surrogate(double ratio, double advantage, double eps);

struct SampleLoss {
  dm::Tensor total;  // 1 x 1
  double policy = 0.0;
  double value = 0.0;
  double entropy = 0.0;
  double ratio = 1.0;
};

// -surrogate + value_coef * (V - ret)^2 - entropy_coef * H(pi) for one record,
// with the ratio taken against the stored old log-probability.
SampleLoss sample_loss(const StepRecord& rec, const std::vector<double>& pe,
                       std::size_t nodes, const PolicyParams& params,
                       const NetConfig& net, const PpoConfig& cfg);

struct LossStats {
  double total = 0.0;
  double policy = 0.0;
  double value = 0.0;
  double entropy = 0.0;
};

// Batch-mean loss as a differentiable scalar. Throws TrainingError with a
// diagnostic when the loss is not finite.
dm::Tensor ppo_loss(const RolloutBuffer& buffer, std::span<const std::size_t> batch,
                    std::size_t nodes, const PolicyParams& params, const NetConfig& net,
                    const PpoConfig& cfg, LossStats* stats = nullptr);

struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::uint64_t t = 0;

  static AdamState zeros_like(const PolicyParams& p);
};

// One Adam step from the gradients currently held by params.
void adam_step(PolicyParams& params, AdamState& state, const PpoConfig& cfg);

// Detached copy used for collection (no tape is recorded).
PolicyParams snapshot(const PolicyParams& params);

struct EpisodeSpec {
  std::uint64_t field_seed = 0;
  std::uint64_t env_seed = 0;
  std::uint64_t policy_seed = 0;
  std::optional<std::size_t> start_node;
};

// Builds the environment for one episode. Must be safe to call concurrently.
using EnvFactory = std::function<Environment(const EpisodeSpec&)>;

// Runs every worker's episode list on its own thread and concatenates the
// records by worker index. Actions are sampled from the snapshot's policy.
RolloutBuffer collect_rollouts(const PolicyParams& snapshot, const NetConfig& net,
                               const Roadmap& roadmap, const EnvFactory& factory,
                               const std::vector<std::vector<EpisodeSpec>>& per_worker);

struct UpdateStats {
  LossStats mean;  // over every sample of every epoch
  std::size_t steps = 0;
};

// ppo_iters epochs of shuffled minibatches; one Adam step per minibatch.
UpdateStats ppo_update(PolicyParams& params, AdamState& adam, const RolloutBuffer& buffer,
                       std::size_t nodes, const NetConfig& net, const PpoConfig& cfg,
                       std::mt19937_64& rng);

struct TrainConfig {
  PpoConfig ppo;
  NetConfig net;
  EnvConfig env;
  FieldGenConfig field;
  std::size_t map_width = 10;
  std::size_t map_height = 10;
  std::size_t roadmap_k = 20;
  std::vector<double> altitudes{8.0, 14.0};
  std::size_t total_episodes = 200;
  std::size_t checkpoint_interval = 50;
  bool random_start = true;
  std::uint64_t seed = 0;

  void validate() const;
};

struct TrainLogRow {
  std::size_t episode = 0;
  double wall_time_s = 0.0;
  double mean_return = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
};

struct TrainResult {
  PolicyParams params;
  std::vector<TrainLogRow> log;
  std::vector<std::filesystem::path> checkpoints;
  std::filesystem::path final_checkpoint;
};

inline constexpr const char* kTrainLogHeader =
    "episode,wall_time_s,mean_return,policy_loss,value_loss,entropy";

// Seeds of worker w in training episode e (1-based).
EpisodeSpec training_episode_spec(const TrainConfig& cfg, std::size_t episode,
                                  std::size_t worker, std::size_t nodes);

// Runs episodes until total_episodes is reached, appending rows to
// out_dir/train_log.csv and writing checkpoints (parameters, manifest and
// optimizer state) every checkpoint_interval episodes and after the last one.
// With resume_from, training continues from that checkpoint's episode. Throws
// TrainingError on a non-finite loss or parameter; checkpoints already written
// are kept and a diagnostic file is left in out_dir.
TrainResult train(const TrainConfig& cfg, const std::filesystem::path& out_dir,
                  const std::optional<std::filesystem::path>& resume_from = std::nullopt);

std::filesystem::path checkpoint_name(const std::filesystem::path& dir, std::size_t episode);
std::filesystem::path optimizer_state_path(const std::filesystem::path& checkpoint);

}  // namespace ipp3d
