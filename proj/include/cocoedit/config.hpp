#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "cocoedit/errors.hpp"
#include "cocoedit/metrics.hpp"
#include "cocoedit/nftloss.hpp"
#include "cocoedit/rewards.hpp"

namespace cocoedit {

struct TrainConfig {
  double learning_rate = 3e-4;
  std::string optimizer = "adam";  // adam | sgd
  int iterations = 200;
  int group_size = 12;
  int prompts_per_iteration = 4;
  int batch_size = 8;
  int epochs_per_iteration = 1;
  double ema_eta = 0.0;
  double t_epsilon = 0.01;
  int sampler_steps = 10;
  std::uint64_t seed = 0;
  std::string z_c_mode = "std";
  double z_c_fixed = 1.0;
  std::vector<std::size_t> hidden{64, 64};
  bool skip = true;
  double init_output_scale = 0.1;
  // Flow-matching pretraining of the reference policy on base-editor outputs.
  int pretrain_steps = 1500;
  int pretrain_batch = 16;
  double pretrain_lr = 3e-3;
  int eval_samples = 8;
};

struct TaskConfig {
  std::size_t n = 8;
  std::size_t pool_size = 4;
  std::size_t min_size = 2;
  std::size_t max_size = 3;
  int dilation_radius = 1;
  double target_scale = 0.5;
  double base_strength_min = 0.0;
  double base_strength_max = 0.6;
  double base_spill = 0.5;
  double base_background_noise = 0.05;
  double base_drift = 0.0;
};

struct RewardsConfig {
  RewardWeights weights;
  std::string provider = "oracle";  // file | oracle | constant
  std::string score_file;
  double constant_value = 0.5;
};

struct MetricsSection {
  double tau_db = 40.0;
  double max_intensity = 1.0;
  int window_size = 11;
  double window_sigma = 1.5;
  double filter_threshold = 9.4;

  MetricConfig metric_config() const;
};

struct Config {
  TrainConfig train;
  NftConfig nft;
  RewardsConfig rewards;
  MetricsSection metrics;
  TaskConfig task;
};

/// Lists every offending key, one per entry in `problems()`.
class ConfigError : public InvalidArgument {
 public:
  explicit ConfigError(std::vector<std::string> problems);
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  std::vector<std::string> problems_;
};

/// Parses a config document; missing keys keep their defaults.
Config config_from_json(const nlohmann::json& doc);
nlohmann::json config_to_json(const Config& cfg);
Config load_config(const std::filesystem::path& path);

/// Applies "section.key=value" overrides; the value is parsed as JSON when it
/// can be, otherwise taken as a string.
void apply_overrides(nlohmann::json& doc, const std::vector<std::string>& overrides);

/// Range checks across all sections; throws ConfigError.
void validate(const Config& cfg);

}  // namespace cocoedit
