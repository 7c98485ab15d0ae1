// cocoedit: masked-consistency evaluation, score filtering, correlation,
// mask dilation and toy training.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "cocoedit/config.hpp"
#include "cocoedit/errors.hpp"
#include "cocoedit/evalcli.hpp"
#include "cocoedit/parallel.hpp"
#include "cocoedit/pgm.hpp"

namespace fs = std::filesystem;
using namespace cocoedit;

namespace {

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  bool deterministic = false;
  std::string out;
  std::vector<std::string> overrides;
};

Config resolve_config(const Globals& g) {
  nlohmann::json doc = nlohmann::json::object();
  if (!g.config_path.empty()) {
    std::ifstream in(g.config_path);
    if (!in) throw IoError("cannot open config " + g.config_path);
    try {
      doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError("config " + g.config_path + ": " + e.what(), e.byte);
    }
  }
  apply_overrides(doc, g.overrides);
  if (g.seed) doc["train"]["seed"] = *g.seed;
  return config_from_json(doc);
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

}  // namespace

int main(int argc, char** argv) {
  configure_threads_from_env();

  CLI::App app{"cocoedit: region-consistent editing toolkit"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config_path, "JSON config with sections train, nft, rewards, metrics, task");
  app.add_option("--seed", g.seed, "override train.seed");
  app.add_flag("--deterministic", g.deterministic, "serial, fixed-order execution");
  app.add_option("--out", g.out, "output file or directory");
  app.add_option("--set", g.overrides, "override a config key: section.key=value")
      ->expected(1)
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  app.fallthrough();

  // eval
  auto* eval = app.add_subcommand("eval", "masked PSNR/SSIM over (input, edited, mask) triplets");
  std::string manifest_path;
  bool skip_errors = false;
  eval->add_option("manifest", manifest_path, "JSON-lines manifest")->required();
  eval->add_flag("--skip-errors", skip_errors, "exit 0 even if some samples fail");

  // filter
  auto* filter = app.add_subcommand("filter", "keep ids whose score exceeds a threshold");
  std::string scores_path, histogram_path;
  std::optional<double> threshold;
  filter->add_option("scores", scores_path, "JSON-lines scores in [0,10]")->required();
  filter->add_option("--threshold", threshold, "strict threshold (default metrics.filter_threshold)");
  filter->add_option("--histogram", histogram_path, "histogram CSV path");

  // corr
  auto* corr = app.add_subcommand("corr", "Pearson correlation between two score files");
  std::string corr_a, corr_b;
  corr->add_option("a", corr_a, "first score file")->required();
  corr->add_option("b", corr_b, "second score file")->required();

  // dilate
  auto* dil = app.add_subcommand("dilate", "square dilation of a PGM mask");
  std::string mask_in;
  int radius = 1;
  dil->add_option("mask", mask_in, "input mask (P5/P2, values 0/255)")->required();
  dil->add_option("--radius", radius, "Chebyshev radius")->check(CLI::NonNegativeNumber);

  // train
  auto* tr = app.add_subcommand("train", "run the toy training loop");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  set_deterministic(g.deterministic);

  try {
    if (*eval) {
      const Config cfg = resolve_config(g);
      const auto manifest = read_manifest(manifest_path);
      const EvalReport report = run_eval(manifest, cfg.metrics.metric_config());
      const std::string csv = eval_report_csv(report);
      if (g.out.empty()) std::cout << csv;
      else write_text(g.out, csv);
      for (const auto& r : report.rows)
        if (!r.error.empty()) std::cerr << "error: " << r.id << ": " << r.error << "\n";
      if (report.failures && !skip_errors) return kExitData;
      return kExitOk;
    }
    if (*filter) {
      const Config cfg = resolve_config(g);
      const double thr = threshold.value_or(cfg.metrics.filter_threshold);
      const auto scores = read_scores(scores_path, std::make_pair(0.0, 10.0));
      const FilterResult res = filter_scores(scores, thr);
      std::string ids;
      for (const auto& id : res.retained) ids += id + "\n";
      if (g.out.empty()) std::cout << ids;
      else write_text(g.out, ids);
      if (!histogram_path.empty()) write_text(histogram_path, histogram_csv(res));
      std::cerr << "retained " << res.retained.size() << " of " << scores.size()
                << " (threshold " << format_number(thr) << ")\n";
      return kExitOk;
    }
    if (*corr) {
      const CorrelationResult res = correlate(read_scores(corr_a), read_scores(corr_b));
      std::cout << "pearson_r," << format_number(res.r) << "\n";
      std::cout << "n," << res.pairs.size() << "\n";
      if (!g.out.empty()) write_text(g.out, pairs_csv(res));
      return kExitOk;
    }
    if (*dil) {
      if (g.out.empty()) throw InvalidArgument("dilate: --out is required");
      const EditMask m = read_pgm_mask(mask_in);
      write_pgm_mask(dilate(m, radius), g.out);
      return kExitOk;
    }
    if (*tr) {
      const Config cfg = resolve_config(g);
      const fs::path out = g.out.empty() ? fs::path("train_out") : fs::path(g.out);
      const TrainResult res = run_training(cfg, out);
      std::cout << "iterations," << cfg.train.iterations << "\n"
                << "initial_mean_raw," << format_number(res.initial_eval.mean_raw) << "\n"
                << "final_mean_raw," << format_number(res.final_eval.mean_raw) << "\n"
                << "log," << (out / "metrics.jsonl").string() << "\n"
                << "checkpoint," << (out / "checkpoint.json").string() << "\n";
      return kExitOk;
    }
  } catch (const ConfigError& e) {
    for (const auto& p : e.problems()) std::cerr << "config error: " << p << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
  return kExitUsage;
}
