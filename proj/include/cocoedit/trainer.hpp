#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"

#include "cocoedit/config.hpp"
#include "cocoedit/flowmodel.hpp"
#include "cocoedit/nftloss.hpp"
#include "cocoedit/rewards.hpp"
#include "cocoedit/toy_task.hpp"

namespace cocoedit {

/// Named random sub-streams derived from the single config seed.
enum class Stream : std::uint64_t {
  Init = 1,
  Tasks = 2,
  Noise = 3,
  TimeStep = 4,
  Epsilon = 5,
  Shuffle = 6,
  Prompts = 7,
  Pretrain = 8,
  Eval = 9,
};

std::mt19937_64 substream(std::uint64_t seed, Stream stream, std::uint64_t a = 0,
                          std::uint64_t b = 0, std::uint64_t c = 0);

struct SampleGroup {
  std::size_t task_index = 0;
  std::vector<Latent> samples;  // K latents
};

/// K Euler-ODE samples per task from `old_policy`. Noise for sample k of
/// prompt slot p in iteration i comes from substream(seed, Noise, i, p, k), so
/// results do not depend on the thread count.
std::vector<SampleGroup> collect_samples(const VelocityField& old_policy,
                                         const std::vector<ToyEditTask>& tasks,
                                         const std::vector<std::size_t>& task_indices, int k,
                                         int sampler_steps, std::uint64_t seed,
                                         std::uint64_t iteration);

/// Pixel-domain view of a latent sample (clamped to [0,1]).
Grid2D decode(const Latent& latent, std::size_t n);

struct RewardContext {
  const RewardProvider* provider = nullptr;
  RewardWeights weights;
  ZcSpec zc;
  MetricConfig metrics;
  RewardCache* cache = nullptr;  // optional
};

/// r_sim over complement(edit mask), r_mllm from the provider, then combine,
/// centre and map to optimality probabilities.
GroupRewards collect_rewards(const SampleGroup& group, const ToyEditTask& task,
                             const RewardContext& ctx);

struct BufferEntry {
  std::size_t task_index = 0;
  Latent x0;
  double optimality = 0.5;
};

/// Transient per-iteration store; cleared after every optimization pass.
class Buffer {
 public:
  void add(const SampleGroup& group, const GroupRewards& rewards);
  void clear() { entries_.clear(); }
  bool empty() const { return entries_.empty(); }
  std::size_t size() const { return entries_.size(); }
  const std::vector<BufferEntry>& entries() const { return entries_; }

 private:
  std::vector<BufferEntry> entries_;
};

struct StepDiagnostics {
  double mean_objective = 0.0;
  double mean_l_pos = 0.0;
  double mean_l_neg = 0.0;
  double mean_l_ner = 0.0;
  double mean_l_er = 0.0;
  double ner_active_rate = 0.0;
  double er_active_rate = 0.0;
  double grad_norm = 0.0;
  std::size_t entries = 0;
};

/// Parameter update rule. `sgd` is plain gradient descent; `adam` keeps
/// first/second moment estimates across calls (bias-corrected).
class Optimizer {
 public:
  enum class Kind { Sgd, Adam };

  explicit Optimizer(Kind kind = Kind::Sgd, double beta1 = 0.9, double beta2 = 0.999,
                     double eps = 1e-8)
      : kind_(kind), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  static Kind parse(const std::string& name);
  Kind kind() const { return kind_; }
  std::uint64_t steps() const { return t_; }

  void step(std::span<double> params, std::span<const double> grad, double lr);

 private:
  Kind kind_;
  double beta1_, beta2_, eps_;
  std::uint64_t t_ = 0;
  std::vector<double> m_, v_;
};

struct OptimizeContext {
  const std::vector<ToyEditTask>* tasks = nullptr;
  const VelocityField* old_policy = nullptr;
  const VelocityField* ref_policy = nullptr;  // needed when kl_weight > 0
  NftConfig nft;
  double learning_rate = 3e-4;
  int batch_size = 8;
  double t_epsilon = 0.01;
  std::uint64_t seed = 0;
  std::uint64_t iteration = 0;
  std::uint64_t epoch = 0;
  Optimizer* optimizer = nullptr;  // plain gradient descent when null
};

/// Builds the objective context for one buffer entry with its (t, eps) draw.
SampleContext make_sample_context(const BufferEntry& entry, const ToyEditTask& task,
                                  const VelocityField& old_policy,
                                  const VelocityField* ref_policy, double t,
                                  std::span<const double> eps);

/// One pass over the (shuffled) buffer: per mini-batch, average the gradient of
/// the total objective and take one optimizer step on `policy`.
StepDiagnostics optimize_step(const Buffer& buffer, VelocityField& policy,
                              const OptimizeContext& ctx);

/// theta_old <- eta theta_old + (1 - eta) theta.
void ema_update(std::span<double> theta_old, std::span<const double> theta, double eta);

/// Flow-matching pretraining on base-editor outputs: stands in for the
/// pretrained reference policy. Uses Adam.
void pretrain_reference(MlpField& field, const std::vector<ToyEditTask>& tasks,
                        const TaskConfig& task_cfg, int steps, int batch, double lr,
                        std::uint64_t seed);

struct PolicyEvaluation {
  double mean_oracle = 0.0;
  double mean_r_sim = 0.0;
  double mean_psnr_norm = 0.0;  // non-edit region
  double mean_raw = 0.0;
  double mean_edit_distance = 0.0;
};

PolicyEvaluation evaluate_policy(const VelocityField& policy, const std::vector<ToyEditTask>& tasks,
                                 int samples_per_task, int sampler_steps, std::uint64_t seed,
                                 const RewardWeights& weights, const MetricConfig& metrics);

nlohmann::json to_json(const PolicyEvaluation& e);

struct TrainResult {
  MlpField initial;
  MlpField policy;
  std::vector<nlohmann::json> log;  // one object per iteration
  PolicyEvaluation initial_eval;
  PolicyEvaluation final_eval;
};

struct TrainHooks {
  /// Called with each iteration's log record as soon as it is produced.
  std::function<void(const nlohmann::json&)> on_iteration;
  /// Where to leave the last good policy if the run aborts.
  std::optional<std::filesystem::path> abort_checkpoint;
};

/// Reward provider selected by `rewards.provider`.
std::unique_ptr<RewardProvider> make_provider(const RewardsConfig& cfg);

std::vector<ToyEditTask> make_tasks(const Config& cfg);

/// Full loop: pretrain reference, then per iteration collect -> reward ->
/// optimize -> EMA -> clear.
TrainResult train(const Config& cfg, const TrainHooks& hooks = {});

}  // namespace cocoedit
