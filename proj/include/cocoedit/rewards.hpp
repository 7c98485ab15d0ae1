#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "cocoedit/grid.hpp"
#include "cocoedit/metrics.hpp"

namespace cocoedit {

struct RewardWeights {
  double lambda_mllm = 0.8;
  double lambda_sim = 0.2;
  double w_ssim = 0.5;

  void validate() const;
};

/// w_ssim * SSIM + (1 - w_ssim) * normalized PSNR, both over the non-edit
/// region (the complement of `edit_mask`).
double sim_reward(const Grid2D& input, const Grid2D& sample, const EditMask& edit_mask,
                  const MetricConfig& cfg = {}, double w_ssim = 0.5);

/// Linear reward aggregation before the optimality transform.
double combine(double r_mllm, double r_sim, const RewardWeights& w);

/// Subtracts the group mean.
std::vector<double> normalize_group(std::span<const double> raw);

enum class ZcMode { GroupStd, Fixed, MaxAbs };

struct ZcSpec {
  ZcMode mode = ZcMode::GroupStd;
  double fixed = 1.0;  // used by ZcMode::Fixed
};

ZcMode parse_zc_mode(const std::string& name);
std::string to_string(ZcMode mode);

struct Optimality {
  std::vector<double> values;  // each in [0,1]
  double z_c = 1.0;
};

/// 0.5 + 0.5 * clip(c_i / Z_c, -1, 1).
Optimality optimality_probability(std::span<const double> centered, const ZcSpec& zc = {});

struct GroupRewards {
  std::vector<double> raw;
  std::vector<double> centered;
  std::vector<double> optimality;
  double z_c = 1.0;
  // Per-sample components, kept for logging.
  std::vector<double> r_sim;
  std::vector<double> r_mllm;
};

/// Combine per-sample components into a GroupRewards record.
GroupRewards assemble_group(std::span<const double> r_mllm, std::span<const double> r_sim,
                            const RewardWeights& w, const ZcSpec& zc);

/// What an edit is supposed to achieve. `region` is where the target
/// intensity applies.
struct EditSpec {
  EditMask region;
  double target_intensity = 0.5;
  double target_scale = 0.5;
};

struct RewardQuery {
  const Grid2D& input;
  const EditSpec* spec = nullptr;  // optional
  std::span<const Grid2D> samples;
  std::span<const std::string> ids;  // empty or one per sample
};

/// Stand-in for a vision-language judge. Scores are in [0,1]. Implementations
/// must be deterministic and safe to call concurrently.
class RewardProvider {
 public:
  virtual ~RewardProvider() = default;
  virtual std::string id() const = 0;
  virtual std::vector<double> score(const RewardQuery& query) const = 0;
};

/// Reads JSON lines {"id": string, "score": real in [0,10]}; returns score/10.
/// Duplicate ids: last entry wins and a warning is recorded.
class FileRewardProvider final : public RewardProvider {
 public:
  explicit FileRewardProvider(const std::filesystem::path& path);
  static FileRewardProvider from_string(const std::string& text, std::string source = "<memory>");

  std::string id() const override { return "file:" + source_; }
  std::vector<double> score(const RewardQuery& query) const override;
  double lookup(const std::string& id) const;
  const std::vector<std::string>& warnings() const { return warnings_; }

 private:
  FileRewardProvider() = default;
  void load(const std::string& text);

  std::string source_;
  std::unordered_map<std::string, double> scores_;
  std::vector<std::string> warnings_;
};

/// clip(1 - |mean over spec.region - target| / target_scale, 0, 1). Uses the
/// bound spec if one was given at construction, otherwise the query's.
class OracleRewardProvider final : public RewardProvider {
 public:
  OracleRewardProvider() = default;
  explicit OracleRewardProvider(EditSpec spec) : bound_(std::move(spec)) {}

  std::string id() const override { return "oracle"; }
  std::vector<double> score(const RewardQuery& query) const override;
  static double score_one(const Grid2D& sample, const EditSpec& spec);

 private:
  std::optional<EditSpec> bound_;
};

class ConstantRewardProvider final : public RewardProvider {
 public:
  explicit ConstantRewardProvider(double value);
  std::string id() const override;
  std::vector<double> score(const RewardQuery& query) const override;

 private:
  double value_;
};

std::unique_ptr<RewardProvider> provider_file_backed(const std::filesystem::path& path);
std::unique_ptr<RewardProvider> provider_synthetic_oracle(const EditSpec& spec);
std::unique_ptr<RewardProvider> provider_synthetic_oracle();
std::unique_ptr<RewardProvider> provider_constant(double value);

/// Memo of per-sample scores keyed by (provider id, sample content hash).
class RewardCache {
 public:
  std::optional<double> get(const std::string& provider, std::uint64_t sample_hash) const;
  void put(const std::string& provider, std::uint64_t sample_hash, double value);
  std::size_t size() const;
  void clear();

 private:
  mutable std::mutex mu_;
  std::unordered_map<std::string, double> map_;
};

/// FNV-1a over the raw bytes of the grid's shape and values.
std::uint64_t content_hash(const Grid2D& grid);

}  // namespace cocoedit
