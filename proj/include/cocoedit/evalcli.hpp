#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cocoedit/config.hpp"
#include "cocoedit/metrics.hpp"
#include "cocoedit/trainer.hpp"

namespace cocoedit {

// Exit codes shared by every CLI verb.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitNumeric = 3;

/// Maps a library exception onto the CLI exit-code contract.
int exit_code_for(const std::exception& e);

struct ManifestRecord {
  std::string id;
  std::filesystem::path input;
  std::filesystem::path edited;
  std::filesystem::path mask;  // edit = 255
  std::string edit_type;
};

/// JSON lines; relative paths resolve against the manifest's directory.
std::vector<ManifestRecord> read_manifest(const std::filesystem::path& path);
std::vector<ManifestRecord> parse_manifest(const std::string& text,
                                           const std::filesystem::path& base_dir);

struct EvalRow {
  std::string id;
  std::string edit_type;
  double psnr_db = 0.0;
  double psnr_norm = 0.0;
  double ssim = 0.0;
  double active_pixel_fraction = 0.0;  // non-edit fraction that was scored
  std::string error;                   // non-empty when the sample failed
};

struct EvalAggregate {
  std::string group;  // edit_type, or "*" for overall
  std::size_t count = 0;
  double psnr_db = 0.0;
  double psnr_norm = 0.0;
  double ssim = 0.0;
  double active_pixel_fraction = 0.0;
};

struct EvalReport {
  std::vector<EvalRow> rows;  // manifest order
  std::vector<EvalAggregate> aggregates;  // per edit_type (sorted), then overall
  std::size_t failures = 0;
};

EvalRow evaluate_triplet(const ManifestRecord& rec, const MetricConfig& cfg);

/// Per-sample metrics over the complement of each mask, then unweighted means.
EvalReport run_eval(const std::vector<ManifestRecord>& manifest, const MetricConfig& cfg);

/// CSV: kind,id,edit_type,psnr_db,psnr_norm,ssim,active_pixel_fraction,error
std::string eval_report_csv(const EvalReport& report);

struct ScoreRecord {
  std::string id;
  double score = 0.0;
};

/// JSON lines {"id", "score"}. With `range` set, scores outside it are a
/// parse error. Line numbers in errors are 1-based.
std::vector<ScoreRecord> read_scores(const std::filesystem::path& path,
                                     std::optional<std::pair<double, double>> range = {});
std::vector<ScoreRecord> parse_scores(const std::string& text, const std::string& source,
                                      std::optional<std::pair<double, double>> range = {});

struct FilterResult {
  std::vector<std::string> retained;  // score > threshold, input order
  std::vector<std::string> rejected;
  std::array<std::size_t, 10> unit_bins{};  // [k, k+1), last bin closed at 10
  std::array<std::size_t, 5> fine_bins{};   // 0.2-wide on [9, 10], last closed
};

inline constexpr std::array<double, 6> kFineEdges{9.0, 9.2, 9.4, 9.6, 9.8, 10.0};

FilterResult filter_scores(const std::vector<ScoreRecord>& scores, double threshold);
std::string histogram_csv(const FilterResult& result);

struct CorrelationResult {
  double r = 0.0;
  std::vector<std::tuple<std::string, double, double>> pairs;  // order of the first file
};

/// Inner join on id, then Pearson r.
CorrelationResult correlate(const std::vector<ScoreRecord>& a, const std::vector<ScoreRecord>& b);
std::string pairs_csv(const CorrelationResult& result);

/// Renders a double the way every CSV/text output does (shortest round-trip).
std::string format_number(double v);

/// Runs the toy training loop and writes metrics.jsonl, checkpoint.json,
/// initial_checkpoint.json and summary.json into `out_dir`.
TrainResult run_training(const Config& cfg, const std::filesystem::path& out_dir);

}  // namespace cocoedit
