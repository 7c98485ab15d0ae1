// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include "grad_check.hpp"
#include "json.hpp"
#include "nft_instances.hpp"
#include "oracles.hpp"

#include "cocoedit/config.hpp"
#include "cocoedit/evalcli.hpp"
#include "cocoedit/metrics.hpp"
#include "cocoedit/nftloss.hpp"
#include "cocoedit/parallel.hpp"
#include "cocoedit/rewards.hpp"
#include "cocoedit/trainer.hpp"

using namespace cocoedit;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

const fs::path kSource = COCOEDIT_SOURCE_DIR;
int failures = 0;

void report(int id, bool ok, const std::string& what, const std::string& detail) {
  if (!ok) ++failures;
  std::cout << "criterion " << id << ": " << (ok ? "PASS" : "FAIL") << "  " << what << "  ["
            << detail << "]" << std::endl;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(3);
  os << v;
  return os.str();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void metric_oracle() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(101);
  const MetricConfig cfg;
  const EditMask full = oracle::full_mask(32, 32);
  double worst = 0.0;
  for (int k = 0; k < 100; ++k) {
    const Grid2D a = oracle::random_grid(rng, 32, 32);
    Grid2D b = a;
    std::normal_distribution<double> n(0.0, 0.02 + 0.2 * (k % 10) / 10.0);
    for (double& v : b.values()) v = std::clamp(v + n(rng), 0.0, 1.0);
    worst = std::max(worst, std::abs(masked_psnr_norm(a, b, full, cfg).value - oracle::psnr_norm(a, b)));
    worst = std::max(worst, std::abs(masked_ssim(a, b, full, cfg).value - oracle::ssim(a, b, full)));
  }
  const double secs = seconds_since(t0);
  report(1, worst <= 1e-6 && secs < 10.0, "full-mask metrics equal unmasked references",
         "max abs err " + fmt(worst) + ", " + fmt(secs) + " s");
}

void region_insensitivity() {
  std::mt19937_64 rng(102);
  std::uniform_real_distribution<double> cov(0.1, 0.9);
  int exact = 0;
  for (int k = 0; k < 100; ++k) {
    const Grid2D input = oracle::random_grid(rng, 32, 32);
    const Grid2D sample = oracle::random_grid(rng, 32, 32);
    EditMask edit = oracle::random_mask(rng, 32, 32, cov(rng));
    if (edit.none() || edit.all()) edit.set(0, !edit[0]);
    Grid2D perturbed = sample;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (std::size_t i = 0; i < perturbed.size(); ++i)
      if (edit[i]) perturbed[i] = u(rng);
    const double r0 = sim_reward(input, sample, edit);
    const double r1 = sim_reward(input, perturbed, edit);
    if (std::memcmp(&r0, &r1, sizeof r0) == 0) ++exact;
  }
  report(2, exact == 100, "edit-region perturbations leave r_sim bitwise unchanged",
         std::to_string(exact) + "/100 exact");
}

// Each row of the reference table: | `key` | default | source |
std::map<std::string, std::pair<std::string, std::string>> config_doc_rows() {
  std::map<std::string, std::pair<std::string, std::string>> rows;
  std::istringstream in(slurp(kSource / "docs" / "config_reference.md"));
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("| `", 0) != 0) continue;
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line.substr(1));
    while (std::getline(ls, cell, '|')) {
      const auto b = cell.find_first_not_of(" `"), e = cell.find_last_not_of(" `");
      cells.push_back(b == std::string::npos ? "" : cell.substr(b, e - b + 1));
    }
    if (cells.size() >= 3) rows[cells[0]] = {cells[1], cells[2]};
  }
  return rows;
}

void published_constants() {
  const Config c;
  const std::vector<std::tuple<std::string, double, double>> expect{
      {"metrics.tau_db", c.metrics.tau_db, 40.0},
      {"metrics.window_size", c.metrics.window_size, 11},
      {"metrics.window_sigma", c.metrics.window_sigma, 1.5},
      {"rewards.w_ssim", c.rewards.weights.w_ssim, 0.5},
      {"nft.tau_plus", c.nft.tau_plus, 0.001},
      {"rewards.lambda_mllm", c.rewards.weights.lambda_mllm, 0.8},
      {"rewards.lambda_sim", c.rewards.weights.lambda_sim, 0.2},
      {"nft.lambda_ner", c.nft.lambda_ner, 0.5},
      {"nft.lambda_er", c.nft.lambda_er, 0.2},
      {"train.learning_rate", c.train.learning_rate, 3e-4},
      {"train.group_size", c.train.group_size, 12},
      {"train.sampler_steps", c.train.sampler_steps, 10},
      {"metrics.filter_threshold", c.metrics.filter_threshold, 9.4},
  };
  const auto rows = config_doc_rows();
  const MetricConfig mc = c.metrics.metric_config();
  bool ok = mc.tau_db == 40.0 && mc.window.size == 11 && mc.window.sigma == 1.5;
  std::string bad;
  for (const auto& [key, actual, wanted] : expect) {
    const auto it = rows.find(key);
    const bool doc_ok = it != rows.end() && std::stod(it->second.first) == wanted &&
                        it->second.second.size() >= 10;
    if (actual != wanted || !doc_ok) {
      ok = false;
      bad += " " + key;
    }
  }
  report(3, ok, "published constants are the defaults and documented with sources",
         bad.empty() ? "13/13 constants" : "mismatch:" + bad);
}

void optimality() {
  std::mt19937_64 rng(104);
  std::normal_distribution<double> n(0.0, 1.0);
  double worst = 0.0;
  bool monotone = true;
  for (int g = 0; g < 1000; ++g) {
    std::vector<double> raw(12);
    const double scale = std::pow(10.0, (g % 7) - 3);
    for (double& v : raw) v = 0.5 + scale * n(rng);
    if (g % 50 == 0) raw[3] = raw[7];
    const auto c = normalize_group(raw);
    const auto o = optimality_probability(c);
    double mean = 0.0;
    for (double v : raw) mean += v;
    mean /= 12.0;
    double var = 0.0;
    for (double v : raw) var += (v - mean) * (v - mean);
    const double z = std::sqrt(var / 12.0) + 1e-8;
    for (int i = 0; i < 12; ++i) {
      const double want = 0.5 + 0.5 * std::clamp((raw[i] - mean) / z, -1.0, 1.0);
      worst = std::max(worst, std::abs(o.values[i] - want));
      for (int j = 0; j < 12; ++j)
        if (raw[i] > raw[j] && o.values[i] < o.values[j]) monotone = false;
    }
  }
  report(4, worst <= 1e-12 && monotone, "optimality probabilities match the formula",
         "max abs err " + fmt(worst) + ", monotone " + (monotone ? "yes" : "no"));
}

void gradients() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(105);
  double worst = 0.0;
  int active_seen = 0, inactive_seen = 0;
  for (int k = 0; k < 50; ++k) {
    const int combo = k % 12;
    const bool ner = combo & 1, er = combo & 2;
    const double r = std::array<double, 3>{0.0, 0.5, 1.0}[(combo >> 2) % 3];
    auto in = instances::make_nft_instance(rng, ner, er);
    const auto res = total_objective(in.model, in.ctx, r, in.cfg);
    (ner || er ? active_seen : inactive_seen)++;
    worst = std::max(worst, gradcheck::relative_error(
                                in.model.params(),
                                [&] { return objective_terms(in.model, in.ctx, r, in.cfg).total; },
                                res.grad));
  }
  const double secs = seconds_since(t0);
  report(5, worst <= 1e-4 && secs < 30.0 && active_seen && inactive_seen,
         "objective gradient matches central differences",
         "max rel err " + fmt(worst) + ", " + fmt(secs) + " s");
}

void xv_identity() {
  std::mt19937_64 rng(106);
  std::uniform_real_distribution<double> ut(0.0, 1.0);
  double worst = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const auto x0 = instances::randn(rng, 64), x1 = instances::randn(rng, 64);
    const auto vhat = instances::randn(rng, 64);
    const double t = ut(rng);
    const auto xt = interpolate(x0, x1, t);
    const auto v = target_velocity(x0, x1);
    const auto xhat = v_to_x(xt, t, vhat);
    double lhs = 0.0, rhs = 0.0;
    for (std::size_t i = 0; i < 64; ++i) {
      lhs += (xhat[i] - x0[i]) * (xhat[i] - x0[i]);
      rhs += (vhat[i] - v[i]) * (vhat[i] - v[i]);
    }
    worst = std::max(worst, std::abs(lhs - t * t * rhs));
  }
  report(6, worst <= 1e-10, "x-prediction error equals t^2 times velocity error",
         "max abs err " + fmt(worst));
}

void implicit_identities() {
  std::mt19937_64 rng(107);
  std::uniform_real_distribution<double> ub(0.05, 2.0);
  double worst_sum = 0.0;
  int equal_losses = 0;
  for (int k = 0; k < 1000; ++k) {
    const auto vo = instances::randn(rng, 36), vt = instances::randn(rng, 36);
    const auto iv = implicit_velocities(vo, vt, ub(rng));
    for (std::size_t i = 0; i < 36; ++i)
      worst_sum = std::max(worst_sum, std::abs(iv.plus[i] + iv.minus[i] - 2 * vo[i]) /
                                          std::max(1.0, std::abs(vo[i])));
  }
  for (int k = 0; k < 1000; ++k) {
    auto in = instances::make_nft_instance(rng, k % 2, (k / 2) % 2);
    in.ctx.v_old = in.model.evaluate(in.ctx.x_t, in.ctx.t, in.ctx.cond);
    const auto o = objective_terms(in.model, in.ctx, 0.5, in.cfg);
    if (o.l_pos == o.l_neg) ++equal_losses;
  }
  // The sum identity holds up to the rounding of the two affine combinations.
  report(7, worst_sum <= 1e-14 && equal_losses == 1000, "implicit policy identities",
         "max |v+ + v- - 2 v_old| " + fmt(worst_sum) + ", L+ == L- in " +
             std::to_string(equal_losses) + "/1000");
}

std::string log_text(const std::vector<nlohmann::json>& log) {
  std::string s;
  for (const auto& rec : log) s += rec.dump() + "\n";
  return s;
}

Config toy_config() { return load_config(kSource / "configs" / "toy_reference.json"); }

void toy_run() {
  const auto t0 = Clock::now();
  const Config cfg = toy_config();
  set_deterministic(true);
  const TrainResult res = train(cfg);
  set_deterministic(false);
  const double secs = seconds_since(t0);
  const double first = res.log.front()["mean_raw_reward"].get<double>();
  const double last = res.log.back()["mean_raw_reward"].get<double>();
  const std::string golden = slurp(kSource / "tests" / "golden" / "toy_reference_metrics.jsonl");
  const bool same = !golden.empty() && golden == log_text(res.log);
  report(8, last - first >= 0.1 && same && secs < 300.0 && cfg.task.n == 8 &&
                cfg.train.group_size == 8 && cfg.train.iterations == 200,
         "toy run improves raw reward and reproduces the golden log",
         "raw " + fmt(first) + " -> " + fmt(last) + ", golden " + (same ? "identical" : "DIFFERS") +
             ", " + fmt(secs) + " s");
}

// Runs the configs concurrently; the trainer's results do not depend on the
// thread count.
std::vector<PolicyEvaluation> run_all(const std::vector<Config>& cfgs) {
  std::vector<std::future<PolicyEvaluation>> fut;
  for (const auto& c : cfgs)
    fut.push_back(std::async(std::launch::async, [c] { return train(c).final_eval; }));
  std::vector<PolicyEvaluation> out;
  for (auto& f : fut) out.push_back(f.get());
  return out;
}

void ablations() {
  const Config base = toy_config();
  std::vector<Config> cfgs;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Config reg = base;
    reg.train.seed = seed;
    Config unreg = reg;
    unreg.nft.lambda_ner = 0.0;
    unreg.nft.lambda_er = 0.0;
    Config even = reg;
    even.rewards.weights.lambda_mllm = 0.5;
    even.rewards.weights.lambda_sim = 0.5;
    cfgs.insert(cfgs.end(), {reg, unreg, even});
  }
  const auto ev = run_all(cfgs);
  int reg_wins = 0, ratio_wins = 0;
  std::string d9, d10;
  for (int s = 0; s < 5; ++s) {
    const auto &reg = ev[3 * s], &unreg = ev[3 * s + 1], &even = ev[3 * s + 2];
    const bool w9 = reg.mean_psnr_norm >= unreg.mean_psnr_norm &&
                    reg.mean_oracle >= unreg.mean_oracle - 0.05;
    const bool w10 = even.mean_r_sim > reg.mean_r_sim && even.mean_oracle < reg.mean_oracle;
    reg_wins += w9;
    ratio_wins += w10;
    d9 += " s" + std::to_string(s + 1) + ":psnr " + fmt(reg.mean_psnr_norm) + "/" +
          fmt(unreg.mean_psnr_norm) + " oracle " + fmt(reg.mean_oracle) + "/" + fmt(unreg.mean_oracle);
    d10 += " s" + std::to_string(s + 1) + ":r_sim " + fmt(even.mean_r_sim) + "/" +
           fmt(reg.mean_r_sim) + " oracle " + fmt(even.mean_oracle) + "/" + fmt(reg.mean_oracle);
  }
  report(9, reg_wins >= 4, "region regularizers keep the background without losing the edit",
         std::to_string(reg_wins) + "/5 seeds;" + d9);
  report(10, ratio_wins >= 4, "0.5:0.5 reward ratio trades edit reward for similarity",
         std::to_string(ratio_wins) + "/5 seeds;" + d10);
}

int run_cli(const std::string& args) {
  const int raw = std::system(("\"" + std::string(COCOEDIT_BIN) + "\" " + args).c_str());
  return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
}

void filter_oracle() {
  const fs::path dir = fs::temp_directory_path() / "cocoedit_acceptance_filter";
  fs::create_directories(dir);
  std::mt19937_64 rng(111);
  std::uniform_int_distribution<int> milli(0, 10000);
  std::vector<double> scores;
  {
    std::ofstream out(dir / "scores.jsonl");
    for (int i = 0; i < 10000; ++i) {
      // Heavy on the top bins and on exact bin edges.
      int m = milli(rng);
      if (i % 3 == 0) m = 9000 + m % 1001;
      if (i % 17 == 0) m = 9000 + 200 * (m % 6);
      scores.push_back(m / 1000.0);
      out << "{\"id\":\"s" << i << "\",\"score\":" << m / 1000.0 << "}\n";
    }
  }
  const int rc = run_cli("filter \"" + (dir / "scores.jsonl").string() + "\" --out \"" +
                         (dir / "ids.txt").string() + "\" --histogram \"" +
                         (dir / "hist.csv").string() + "\" 2>/dev/null");
  // Brute-force counts.
  std::size_t kept = 0;
  std::vector<std::size_t> unit(10, 0), fine(5, 0);
  const double edges[] = {9.0, 9.2, 9.4, 9.6, 9.8, 10.0};
  for (double s : scores) {
    if (s > 9.4) ++kept;
    for (int k = 0; k < 10; ++k)
      if ((s >= k && s < k + 1) || (k == 9 && s == 10.0)) ++unit[k];
    for (int b = 0; b < 5; ++b)
      if ((s >= edges[b] && s < edges[b + 1]) || (b == 4 && s == 10.0)) ++fine[b];
  }
  std::string want = "bin_lo,bin_hi,count\n";
  for (int k = 0; k < 10; ++k)
    want += std::to_string(k) + "," + std::to_string(k + 1) + "," + std::to_string(unit[k]) + "\n";
  for (int b = 0; b < 5; ++b)
    want += format_number(edges[b]) + "," + format_number(edges[b + 1]) + "," + std::to_string(fine[b]) + "\n";
  const std::string ids = slurp(dir / "ids.txt");
  const std::size_t got_kept = static_cast<std::size_t>(std::count(ids.begin(), ids.end(), '\n'));
  const bool hist_ok = slurp(dir / "hist.csv") == want;

  std::normal_distribution<double> n(0.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> x(1000), y(1000);
    const double rho = -1.0 + trial / 10.0;
    for (int i = 0; i < 1000; ++i) {
      x[i] = 1e3 + 5 * n(rng);
      y[i] = rho * x[i] + (1 - std::abs(rho)) * n(rng);
    }
    worst = std::max(worst, std::abs(pearson(x, y) - oracle::pearson(x, y)));
  }
  fs::remove_all(dir);
  report(11, rc == 0 && got_kept == kept && hist_ok && worst <= 1e-10,
         "filter counts, histogram bins and Pearson match brute force",
         "retained " + std::to_string(got_kept) + "/" + std::to_string(kept) + ", histogram " +
             (hist_ok ? "identical" : "DIFFERS") + ", pearson max err " + fmt(worst));
}

}  // namespace

int main() {
  configure_threads_from_env();
  metric_oracle();
  region_insensitivity();
  published_constants();
  optimality();
  gradients();
  xv_identity();
  implicit_identities();
  toy_run();
  ablations();
  filter_oracle();
  std::cout << (failures ? "acceptance: " + std::to_string(failures) + " criteria failed"
                         : std::string("acceptance: all criteria passed"))
            << std::endl;
  return failures ? 1 : 0;
}
