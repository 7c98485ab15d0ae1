#include "cocoedit/rewards.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iostream>
#include <iterator>
#include <sstream>

#include "json.hpp"

#include "cocoedit/errors.hpp"

namespace cocoedit {

void RewardWeights::validate() const {
  if (lambda_mllm < 0.0 || lambda_sim < 0.0) throw InvalidArgument("reward weights must be >= 0");
  if (!(lambda_mllm + lambda_sim > 0.0)) throw InvalidArgument("reward weights sum to zero");
  if (w_ssim < 0.0 || w_ssim > 1.0) throw InvalidArgument("w_ssim must lie in [0,1]");
}

double sim_reward(const Grid2D& input, const Grid2D& sample, const EditMask& edit_mask,
                  const MetricConfig& cfg, double w_ssim) {
  const EditMask keep = complement(edit_mask);
  const double ssim = masked_ssim(input, sample, keep, cfg).value;
  const double psnr = masked_psnr_norm(input, sample, keep, cfg).value;
  return w_ssim * ssim + (1.0 - w_ssim) * psnr;
}

double combine(double r_mllm, double r_sim, const RewardWeights& w) {
  return w.lambda_mllm * r_mllm + w.lambda_sim * r_sim;
}

std::vector<double> normalize_group(std::span<const double> raw) {
  if (raw.size() < 2) throw InvalidArgument("normalize_group: group needs at least 2 entries");
  double mean = 0.0;
  for (double r : raw) mean += r;
  mean /= static_cast<double>(raw.size());
  std::vector<double> out(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) out[i] = raw[i] - mean;
  return out;
}

ZcMode parse_zc_mode(const std::string& name) {
  if (name == "std") return ZcMode::GroupStd;
  if (name == "fixed") return ZcMode::Fixed;
  if (name == "maxabs") return ZcMode::MaxAbs;
  throw InvalidArgument("unknown z_c mode '" + name + "' (expected std, fixed or maxabs)");
}

std::string to_string(ZcMode mode) {
  switch (mode) {
    case ZcMode::GroupStd: return "std";
    case ZcMode::Fixed: return "fixed";
    case ZcMode::MaxAbs: return "maxabs";
  }
  return "std";
}

Optimality optimality_probability(std::span<const double> centered, const ZcSpec& zc) {
  Optimality out;
  switch (zc.mode) {
    case ZcMode::GroupStd: {
      double ss = 0.0;
      for (double c : centered) ss += c * c;
      out.z_c = std::sqrt(ss / static_cast<double>(std::max<std::size_t>(centered.size(), 1))) + 1e-8;
      break;
    }
    case ZcMode::Fixed:
      if (!(zc.fixed > 0.0)) throw InvalidArgument("fixed z_c must be positive");
      out.z_c = zc.fixed;
      break;
    case ZcMode::MaxAbs: {
      double m = 0.0;
      for (double c : centered) m = std::max(m, std::abs(c));
      out.z_c = m + 1e-8;
      break;
    }
  }
  out.values.resize(centered.size());
  for (std::size_t i = 0; i < centered.size(); ++i) {
    out.values[i] = 0.5 + 0.5 * std::clamp(centered[i] / out.z_c, -1.0, 1.0);
  }
  return out;
}

GroupRewards assemble_group(std::span<const double> r_mllm, std::span<const double> r_sim,
                            const RewardWeights& w, const ZcSpec& zc) {
  if (r_mllm.size() != r_sim.size()) throw InvalidArgument("assemble_group: size mismatch");
  GroupRewards g;
  g.r_mllm.assign(r_mllm.begin(), r_mllm.end());
  g.r_sim.assign(r_sim.begin(), r_sim.end());
  g.raw.resize(r_mllm.size());
  for (std::size_t i = 0; i < r_mllm.size(); ++i) g.raw[i] = combine(r_mllm[i], r_sim[i], w);
  g.centered = normalize_group(g.raw);
  Optimality o = optimality_probability(g.centered, zc);
  g.optimality = std::move(o.values);
  g.z_c = o.z_c;
  return g;
}

// ---------------------------------------------------------------------------
// Providers

FileRewardProvider::FileRewardProvider(const std::filesystem::path& path) : source_(path.string()) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open score file " + path.string());
  load(std::string(std::istreambuf_iterator<char>(in), {}));
}

FileRewardProvider FileRewardProvider::from_string(const std::string& text, std::string source) {
  FileRewardProvider p;
  p.source_ = std::move(source);
  p.load(text);
  return p;
}

void FileRewardProvider::load(const std::string& text) {
  std::istringstream lines(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(lines, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(source_ + ":" + std::to_string(lineno) + ": " + e.what(), lineno);
    }
    if (!j.is_object() || !j.contains("id") || !j["id"].is_string() || !j.contains("score") ||
        !j["score"].is_number()) {
      throw ParseError(source_ + ":" + std::to_string(lineno) +
                           ": expected {\"id\": string, \"score\": number}",
                       lineno);
    }
    const double s = j["score"].get<double>();
    if (!(s >= 0.0 && s <= 10.0)) {
      throw ParseError(source_ + ":" + std::to_string(lineno) + ": score outside [0,10]", lineno);
    }
    const std::string id = j["id"].get<std::string>();
    if (scores_.count(id)) {
      warnings_.push_back(source_ + ":" + std::to_string(lineno) + ": duplicate id '" + id +
                          "', last entry wins");
      std::cerr << "warning: " << warnings_.back() << "\n";
    }
    scores_[id] = s / 10.0;
  }
}

double FileRewardProvider::lookup(const std::string& id) const {
  auto it = scores_.find(id);
  if (it == scores_.end()) throw LookupError("no score for id '" + id + "' in " + source_);
  return it->second;
}

std::vector<double> FileRewardProvider::score(const RewardQuery& query) const {
  if (query.ids.size() != query.samples.size()) {
    throw InvalidArgument("file provider needs one id per sample");
  }
  std::vector<double> out;
  out.reserve(query.ids.size());
  for (const auto& id : query.ids) out.push_back(lookup(id));
  return out;
}

double OracleRewardProvider::score_one(const Grid2D& sample, const EditSpec& spec) {
  if (!spec.region.same_shape(sample)) throw InvalidArgument("oracle: shape mismatch");
  const std::size_t n = spec.region.count();
  if (n == 0) throw EmptyRegionError("oracle: empty target region");
  double acc = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i)
    if (spec.region[i]) acc += sample[i];
  const double mean = acc / static_cast<double>(n);
  return std::clamp(1.0 - std::abs(mean - spec.target_intensity) / spec.target_scale, 0.0, 1.0);
}

std::vector<double> OracleRewardProvider::score(const RewardQuery& query) const {
  const EditSpec* spec = bound_ ? &*bound_ : query.spec;
  if (!spec) throw InvalidArgument("oracle provider: no edit spec");
  std::vector<double> out;
  out.reserve(query.samples.size());
  for (const auto& s : query.samples) out.push_back(score_one(s, *spec));
  return out;
}

ConstantRewardProvider::ConstantRewardProvider(double value) : value_(value) {
  if (!(value >= 0.0 && value <= 1.0)) throw InvalidArgument("constant reward must lie in [0,1]");
}

std::string ConstantRewardProvider::id() const {
  std::ostringstream os;
  os << "constant:" << value_;
  return os.str();
}

std::vector<double> ConstantRewardProvider::score(const RewardQuery& query) const {
  return std::vector<double>(query.samples.size(), value_);
}

std::unique_ptr<RewardProvider> provider_file_backed(const std::filesystem::path& path) {
  return std::make_unique<FileRewardProvider>(path);
}
std::unique_ptr<RewardProvider> provider_synthetic_oracle(const EditSpec& spec) {
  return std::make_unique<OracleRewardProvider>(spec);
}
std::unique_ptr<RewardProvider> provider_synthetic_oracle() {
  return std::make_unique<OracleRewardProvider>();
}
std::unique_ptr<RewardProvider> provider_constant(double value) {
  return std::make_unique<ConstantRewardProvider>(value);
}

// ---------------------------------------------------------------------------

std::uint64_t content_hash(const Grid2D& grid) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 1099511628211ULL;
    }
  };
  const std::uint64_t dims[2] = {grid.height(), grid.width()};
  mix(dims, sizeof dims);
  mix(grid.values().data(), grid.size() * sizeof(double));
  return h;
}

namespace {
std::string cache_key(const std::string& provider, std::uint64_t h) {
  return provider + "#" + std::to_string(h);
}
}  // namespace

std::optional<double> RewardCache::get(const std::string& provider, std::uint64_t h) const {
  std::lock_guard lock(mu_);
  auto it = map_.find(cache_key(provider, h));
  if (it == map_.end()) return std::nullopt;
  return it->second;
}

void RewardCache::put(const std::string& provider, std::uint64_t h, double value) {
  std::lock_guard lock(mu_);
  map_[cache_key(provider, h)] = value;
}

std::size_t RewardCache::size() const {
  std::lock_guard lock(mu_);
  return map_.size();
}

void RewardCache::clear() {
  std::lock_guard lock(mu_);
  map_.clear();
}

}  // namespace cocoedit
