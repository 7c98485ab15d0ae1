#include "cocoedit/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace cocoedit {

MetricConfig MetricsSection::metric_config() const {
  MetricConfig cfg = MetricConfig::with_max_intensity(max_intensity);
  cfg.tau_db = tau_db;
  cfg.window = gaussian_window(window_size, window_sigma);
  return cfg;
}

namespace {

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) {
    if (!out.empty()) out += "; ";
    out += s;
  }
  return out;
}

struct Field {
  std::function<std::string(const nlohmann::json&)> read;  // returns error text or ""
  std::function<nlohmann::json()> write;
};

Field bind(double& v) {
  return {[&v](const nlohmann::json& j) -> std::string {
            if (!j.is_number()) return "expected a number";
            v = j.get<double>();
            return "";
          },
          [&v] { return nlohmann::json(v); }};
}

Field bind(int& v) {
  return {[&v](const nlohmann::json& j) -> std::string {
            if (!j.is_number_integer()) return "expected an integer";
            v = j.get<int>();
            return "";
          },
          [&v] { return nlohmann::json(v); }};
}

Field bind(std::size_t& v) {
  return {[&v](const nlohmann::json& j) -> std::string {
            if (!j.is_number_integer() || j.get<long long>() < 0) return "expected a non-negative integer";
            v = j.get<std::size_t>();
            return "";
          },
          [&v] { return nlohmann::json(v); }};
}

Field bind(std::uint64_t& v, int) {
  return {[&v](const nlohmann::json& j) -> std::string {
            if (!j.is_number_integer() || (j.is_number_integer() && !j.is_number_unsigned() &&
                                           j.get<long long>() < 0))
              return "expected a non-negative integer";
            v = j.get<std::uint64_t>();
            return "";
          },
          [&v] { return nlohmann::json(v); }};
}

Field bind(bool& v) {
  return {[&v](const nlohmann::json& j) -> std::string {
            if (!j.is_boolean()) return "expected true or false";
            v = j.get<bool>();
            return "";
          },
          [&v] { return nlohmann::json(v); }};
}

Field bind(std::string& v) {
  return {[&v](const nlohmann::json& j) -> std::string {
            if (!j.is_string()) return "expected a string";
            v = j.get<std::string>();
            return "";
          },
          [&v] { return nlohmann::json(v); }};
}

Field bind(std::vector<std::size_t>& v) {
  return {[&v](const nlohmann::json& j) -> std::string {
            if (!j.is_array()) return "expected an array of integers";
            std::vector<std::size_t> out;
            for (const auto& e : j) {
              if (!e.is_number_integer() || e.get<long long>() <= 0) return "expected positive integers";
              out.push_back(e.get<std::size_t>());
            }
            v = std::move(out);
            return "";
          },
          [&v] { return nlohmann::json(v); }};
}

using Section = std::map<std::string, Field>;
using Schema = std::map<std::string, Section>;

Schema schema(Config& c) {
  Schema s;
  auto& t = s["train"];
  t["learning_rate"] = bind(c.train.learning_rate);
  t["optimizer"] = bind(c.train.optimizer);
  t["iterations"] = bind(c.train.iterations);
  t["group_size"] = bind(c.train.group_size);
  t["prompts_per_iteration"] = bind(c.train.prompts_per_iteration);
  t["batch_size"] = bind(c.train.batch_size);
  t["epochs_per_iteration"] = bind(c.train.epochs_per_iteration);
  t["ema_eta"] = bind(c.train.ema_eta);
  t["t_epsilon"] = bind(c.train.t_epsilon);
  t["sampler_steps"] = bind(c.train.sampler_steps);
  t["seed"] = bind(c.train.seed, 0);
  t["z_c_mode"] = bind(c.train.z_c_mode);
  t["z_c_fixed"] = bind(c.train.z_c_fixed);
  t["hidden"] = bind(c.train.hidden);
  t["skip"] = bind(c.train.skip);
  t["init_output_scale"] = bind(c.train.init_output_scale);
  t["pretrain_steps"] = bind(c.train.pretrain_steps);
  t["pretrain_batch"] = bind(c.train.pretrain_batch);
  t["pretrain_lr"] = bind(c.train.pretrain_lr);
  t["eval_samples"] = bind(c.train.eval_samples);

  auto& n = s["nft"];
  n["beta"] = bind(c.nft.beta);
  n["tau_plus"] = bind(c.nft.tau_plus);
  n["lambda_ner"] = bind(c.nft.lambda_ner);
  n["lambda_er"] = bind(c.nft.lambda_er);
  n["kl_weight"] = bind(c.nft.kl_weight);

  auto& r = s["rewards"];
  r["lambda_mllm"] = bind(c.rewards.weights.lambda_mllm);
  r["lambda_sim"] = bind(c.rewards.weights.lambda_sim);
  r["w_ssim"] = bind(c.rewards.weights.w_ssim);
  r["provider"] = bind(c.rewards.provider);
  r["score_file"] = bind(c.rewards.score_file);
  r["constant_value"] = bind(c.rewards.constant_value);

  auto& m = s["metrics"];
  m["tau_db"] = bind(c.metrics.tau_db);
  m["max_intensity"] = bind(c.metrics.max_intensity);
  m["window_size"] = bind(c.metrics.window_size);
  m["window_sigma"] = bind(c.metrics.window_sigma);
  m["filter_threshold"] = bind(c.metrics.filter_threshold);

  auto& k = s["task"];
  k["n"] = bind(c.task.n);
  k["pool_size"] = bind(c.task.pool_size);
  k["min_size"] = bind(c.task.min_size);
  k["max_size"] = bind(c.task.max_size);
  k["dilation_radius"] = bind(c.task.dilation_radius);
  k["target_scale"] = bind(c.task.target_scale);
  k["base_strength_min"] = bind(c.task.base_strength_min);
  k["base_strength_max"] = bind(c.task.base_strength_max);
  k["base_spill"] = bind(c.task.base_spill);
  k["base_background_noise"] = bind(c.task.base_background_noise);
  k["base_drift"] = bind(c.task.base_drift);
  return s;
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> problems)
    : InvalidArgument("invalid config: " + join(problems)), problems_(std::move(problems)) {}

Config config_from_json(const nlohmann::json& doc) {
  Config cfg;
  Schema s = schema(cfg);
  std::vector<std::string> problems;
  if (!doc.is_object()) throw ConfigError({"<root>: expected a JSON object"});
  for (const auto& [section, body] : doc.items()) {
    auto sit = s.find(section);
    if (sit == s.end()) {
      problems.push_back(section + ": unknown section");
      continue;
    }
    if (!body.is_object()) {
      problems.push_back(section + ": expected an object");
      continue;
    }
    for (const auto& [key, value] : body.items()) {
      auto fit = sit->second.find(key);
      if (fit == sit->second.end()) {
        problems.push_back(section + "." + key + ": unknown key");
        continue;
      }
      if (std::string err = fit->second.read(value); !err.empty()) {
        problems.push_back(section + "." + key + ": " + err);
      }
    }
  }
  if (!problems.empty()) throw ConfigError(std::move(problems));
  validate(cfg);
  return cfg;
}

nlohmann::json config_to_json(const Config& cfg) {
  Config copy = cfg;
  Schema s = schema(copy);
  nlohmann::json doc = nlohmann::json::object();
  for (auto& [section, fields] : s)
    for (auto& [key, field] : fields) doc[section][key] = field.write();
  return doc;
}

Config load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  try {
    return config_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("config " + path.string() + ": " + e.what(), e.byte);
  }
}

void apply_overrides(nlohmann::json& doc, const std::vector<std::string>& overrides) {
  std::vector<std::string> problems;
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    const auto dot = o.find('.');
    if (eq == std::string::npos || dot == std::string::npos || dot > eq) {
      problems.push_back(o + ": expected section.key=value");
      continue;
    }
    const std::string section = o.substr(0, dot);
    const std::string key = o.substr(dot + 1, eq - dot - 1);
    const std::string raw = o.substr(eq + 1);
    nlohmann::json value;
    try {
      value = nlohmann::json::parse(raw);
    } catch (const nlohmann::json::parse_error&) {
      value = raw;
    }
    doc[section][key] = value;
  }
  if (!problems.empty()) throw ConfigError(std::move(problems));
}

void validate(const Config& c) {
  std::vector<std::string> p;
  const auto& t = c.train;
  if (!(t.learning_rate >= 0.0)) p.push_back("train.learning_rate: must be >= 0");
  if (t.optimizer != "adam" && t.optimizer != "sgd") p.push_back("train.optimizer: expected adam or sgd");
  if (t.iterations < 0) p.push_back("train.iterations: must be >= 0");
  if (t.group_size < 2) p.push_back("train.group_size: must be >= 2");
  if (t.prompts_per_iteration < 1) p.push_back("train.prompts_per_iteration: must be >= 1");
  if (t.batch_size < 1) p.push_back("train.batch_size: must be >= 1");
  if (t.epochs_per_iteration < 1) p.push_back("train.epochs_per_iteration: must be >= 1");
  if (t.ema_eta < 0.0 || t.ema_eta > 1.0) p.push_back("train.ema_eta: must lie in [0,1]");
  if (!(t.t_epsilon > 0.0 && t.t_epsilon < 0.5)) p.push_back("train.t_epsilon: must lie in (0,0.5)");
  if (t.sampler_steps < 1) p.push_back("train.sampler_steps: must be >= 1");
  if (t.z_c_mode != "std" && t.z_c_mode != "fixed" && t.z_c_mode != "maxabs")
    p.push_back("train.z_c_mode: expected std, fixed or maxabs");
  if (!(t.z_c_fixed > 0.0)) p.push_back("train.z_c_fixed: must be positive");
  if (t.pretrain_steps < 0) p.push_back("train.pretrain_steps: must be >= 0");
  if (t.pretrain_batch < 1) p.push_back("train.pretrain_batch: must be >= 1");
  if (!(t.pretrain_lr >= 0.0)) p.push_back("train.pretrain_lr: must be >= 0");
  if (t.eval_samples < 1) p.push_back("train.eval_samples: must be >= 1");

  const auto& n = c.nft;
  if (!(n.beta > 0.0)) p.push_back("nft.beta: must be positive");
  if (n.tau_plus < 0.0) p.push_back("nft.tau_plus: must be >= 0");
  if (n.lambda_ner < 0.0) p.push_back("nft.lambda_ner: must be >= 0");
  if (n.lambda_er < 0.0) p.push_back("nft.lambda_er: must be >= 0");
  if (n.kl_weight < 0.0) p.push_back("nft.kl_weight: must be >= 0");

  const auto& r = c.rewards;
  if (r.weights.lambda_mllm < 0.0) p.push_back("rewards.lambda_mllm: must be >= 0");
  if (r.weights.lambda_sim < 0.0) p.push_back("rewards.lambda_sim: must be >= 0");
  if (!(r.weights.lambda_mllm + r.weights.lambda_sim > 0.0))
    p.push_back("rewards.lambda_mllm: lambda_mllm + lambda_sim must be positive");
  if (r.weights.w_ssim < 0.0 || r.weights.w_ssim > 1.0) p.push_back("rewards.w_ssim: must lie in [0,1]");
  if (r.provider != "file" && r.provider != "oracle" && r.provider != "constant")
    p.push_back("rewards.provider: expected file, oracle or constant");
  if (r.provider == "file" && r.score_file.empty())
    p.push_back("rewards.score_file: required when provider is file");
  if (r.constant_value < 0.0 || r.constant_value > 1.0)
    p.push_back("rewards.constant_value: must lie in [0,1]");

  const auto& m = c.metrics;
  if (!(m.tau_db > 0.0)) p.push_back("metrics.tau_db: must be positive");
  if (!(m.max_intensity > 0.0)) p.push_back("metrics.max_intensity: must be positive");
  if (m.window_size < 1 || m.window_size % 2 == 0) p.push_back("metrics.window_size: must be odd and >= 1");
  if (!(m.window_sigma > 0.0)) p.push_back("metrics.window_sigma: must be positive");

  const auto& k = c.task;
  if (k.n < 2) p.push_back("task.n: must be >= 2");
  if (k.pool_size < 1) p.push_back("task.pool_size: must be >= 1");
  if (k.min_size < 1 || k.min_size > k.max_size || k.max_size >= k.n)
    p.push_back("task.min_size: need 0 < min_size <= max_size < n");
  if (k.dilation_radius < 0) p.push_back("task.dilation_radius: must be >= 0");
  if (!(k.target_scale > 0.0)) p.push_back("task.target_scale: must be positive");
  if (k.base_strength_min < 0.0 || k.base_strength_min > k.base_strength_max)
    p.push_back("task.base_strength_min: need 0 <= base_strength_min <= base_strength_max");
  if (k.base_spill < 0.0 || k.base_spill > 1.0) p.push_back("task.base_spill: must lie in [0,1]");
  if (k.base_background_noise < 0.0) p.push_back("task.base_background_noise: must be >= 0");
  if (k.base_drift < 0.0 || k.base_drift > 1.0) p.push_back("task.base_drift: must lie in [0,1]");

  if (!p.empty()) throw ConfigError(std::move(p));
}

}  // namespace cocoedit
