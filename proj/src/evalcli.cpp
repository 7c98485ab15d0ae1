#include "cocoedit/evalcli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>
#include <unordered_map>

#include "json.hpp"

#include "cocoedit/errors.hpp"
#include "cocoedit/parallel.hpp"
#include "cocoedit/pgm.hpp"

namespace cocoedit {

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const NumericAbort*>(&e)) return kExitNumeric;
  if (dynamic_cast<const ConfigError*>(&e)) return kExitUsage;
  return kExitData;
}

namespace {

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

template <class Fn>
void for_each_json_line(const std::string& text, const std::string& source, Fn&& fn) {
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
      throw ParseError(source + ":" + std::to_string(lineno) + ": " + e.what(), lineno);
    }
    fn(j, lineno);
  }
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

// ---------------------------------------------------------------------------
// Manifest + eval

std::vector<ManifestRecord> parse_manifest(const std::string& text,
                                           const std::filesystem::path& base_dir) {
  std::vector<ManifestRecord> out;
  std::set<std::string> seen;
  const std::string source = "manifest";
  for_each_json_line(text, source, [&](const nlohmann::json& j, std::size_t lineno) {
    auto fail = [&](const std::string& why) {
      throw ParseError(source + ":" + std::to_string(lineno) + ": " + why, lineno);
    };
    if (!j.is_object()) fail("expected an object");
    for (const char* key : {"id", "input", "edited", "mask"})
      if (!j.contains(key) || !j[key].is_string()) fail(std::string("missing string field '") + key + "'");
    ManifestRecord r;
    r.id = j["id"].get<std::string>();
    if (!seen.insert(r.id).second) fail("duplicate id '" + r.id + "'");
    auto resolve = [&](const std::string& p) {
      std::filesystem::path path(p);
      return path.is_absolute() ? path : base_dir / path;
    };
    r.input = resolve(j["input"].get<std::string>());
    r.edited = resolve(j["edited"].get<std::string>());
    r.mask = resolve(j["mask"].get<std::string>());
    if (j.contains("edit_type")) {
      if (!j["edit_type"].is_string()) fail("edit_type must be a string");
      r.edit_type = j["edit_type"].get<std::string>();
    }
    out.push_back(std::move(r));
  });
  return out;
}

std::vector<ManifestRecord> read_manifest(const std::filesystem::path& path) {
  return parse_manifest(slurp(path), path.parent_path());
}

EvalRow evaluate_triplet(const ManifestRecord& rec, const MetricConfig& cfg) {
  EvalRow row;
  row.id = rec.id;
  row.edit_type = rec.edit_type;
  try {
    const Grid2D input = read_pgm(rec.input);
    const Grid2D edited = read_pgm(rec.edited);
    const EditMask mask = read_pgm_mask(rec.mask);
    if (!input.same_shape(edited) || !mask.same_shape(input)) {
      throw InvalidArgument("input, edited and mask shapes differ");
    }
    const EditMask keep = complement(mask);
    const MaskedScore mse = masked_mse(input, edited, keep, cfg);
    row.psnr_db = psnr_db_from_mse(mse.value, cfg.max_intensity);
    row.psnr_norm = normalize_psnr(row.psnr_db, cfg.tau_db);
    row.ssim = masked_ssim(input, edited, keep, cfg).value;
    row.active_pixel_fraction =
        static_cast<double>(mse.active_pixels) / static_cast<double>(keep.size());
  } catch (const std::exception& e) {
    row.error = e.what();
  }
  return row;
}

EvalReport run_eval(const std::vector<ManifestRecord>& manifest, const MetricConfig& cfg) {
  EvalReport report;
  report.rows.resize(manifest.size());
  const long n = static_cast<long>(manifest.size());
#pragma omp parallel for num_threads(thread_count()) schedule(dynamic)
  for (long i = 0; i < n; ++i) report.rows[static_cast<std::size_t>(i)] = evaluate_triplet(manifest[static_cast<std::size_t>(i)], cfg);

  // Sum in id order so aggregates do not depend on manifest order.
  std::vector<const EvalRow*> ok;
  for (const auto& r : report.rows) {
    if (r.error.empty()) ok.push_back(&r);
    else ++report.failures;
  }
  std::sort(ok.begin(), ok.end(), [](const EvalRow* a, const EvalRow* b) { return a->id < b->id; });

  auto aggregate = [](const std::string& group, const std::vector<const EvalRow*>& rows) {
    EvalAggregate a;
    a.group = group;
    a.count = rows.size();
    for (const EvalRow* r : rows) {
      a.psnr_db += r->psnr_db;
      a.psnr_norm += r->psnr_norm;
      a.ssim += r->ssim;
      a.active_pixel_fraction += r->active_pixel_fraction;
    }
    if (a.count) {
      const double c = static_cast<double>(a.count);
      a.psnr_db /= c;
      a.psnr_norm /= c;
      a.ssim /= c;
      a.active_pixel_fraction /= c;
    }
    return a;
  };

  std::map<std::string, std::vector<const EvalRow*>> by_type;
  for (const EvalRow* r : ok) by_type[r->edit_type].push_back(r);
  for (const auto& [type, rows] : by_type) report.aggregates.push_back(aggregate(type, rows));
  report.aggregates.push_back(aggregate("*", ok));
  return report;
}

std::string eval_report_csv(const EvalReport& report) {
  std::string out = "kind,id,edit_type,psnr_db,psnr_norm,ssim,active_pixel_fraction,error\n";
  for (const auto& r : report.rows) {
    out += "sample," + csv_field(r.id) + "," + csv_field(r.edit_type) + ",";
    if (r.error.empty()) {
      out += format_number(r.psnr_db) + "," + format_number(r.psnr_norm) + "," +
             format_number(r.ssim) + "," + format_number(r.active_pixel_fraction) + ",\n";
    } else {
      out += ",,,," + csv_field(r.error) + "\n";
    }
  }
  for (const auto& a : report.aggregates) {
    const bool overall = a.group == "*";
    out += std::string(overall ? "overall" : "edit_type") + "," + std::to_string(a.count) + "," +
           csv_field(overall ? "" : a.group) + "," + format_number(a.psnr_db) + "," +
           format_number(a.psnr_norm) + "," + format_number(a.ssim) + "," +
           format_number(a.active_pixel_fraction) + ",\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Scores, filter, correlation

std::vector<ScoreRecord> parse_scores(const std::string& text, const std::string& source,
                                      std::optional<std::pair<double, double>> range) {
  std::vector<ScoreRecord> out;
  for_each_json_line(text, source, [&](const nlohmann::json& j, std::size_t lineno) {
    if (!j.is_object() || !j.contains("id") || !j["id"].is_string() || !j.contains("score") ||
        !j["score"].is_number()) {
      throw ParseError(source + ":" + std::to_string(lineno) +
                           ": expected {\"id\": string, \"score\": number}",
                       lineno);
    }
    const double s = j["score"].get<double>();
    if (range && !(s >= range->first && s <= range->second)) {
      throw ParseError(source + ":" + std::to_string(lineno) + ": score " + format_number(s) +
                           " outside [" + format_number(range->first) + ", " +
                           format_number(range->second) + "]",
                       lineno);
    }
    out.push_back({j["id"].get<std::string>(), s});
  });
  return out;
}

std::vector<ScoreRecord> read_scores(const std::filesystem::path& path,
                                     std::optional<std::pair<double, double>> range) {
  return parse_scores(slurp(path), path.string(), range);
}

FilterResult filter_scores(const std::vector<ScoreRecord>& scores, double threshold) {
  FilterResult res;
  for (const auto& s : scores) {
    (s.score > threshold ? res.retained : res.rejected).push_back(s.id);
    const std::size_t unit = std::min<std::size_t>(9, static_cast<std::size_t>(std::floor(s.score)));
    ++res.unit_bins[unit];
    if (s.score >= kFineEdges.front()) {
      std::size_t b = 0;
      while (b + 1 < res.fine_bins.size() && s.score >= kFineEdges[b + 1]) ++b;
      ++res.fine_bins[b];
    }
  }
  return res;
}

std::string histogram_csv(const FilterResult& result) {
  std::string out = "bin_lo,bin_hi,count\n";
  for (std::size_t k = 0; k < result.unit_bins.size(); ++k) {
    out += std::to_string(k) + "," + std::to_string(k + 1) + "," +
           std::to_string(result.unit_bins[k]) + "\n";
  }
  for (std::size_t b = 0; b < result.fine_bins.size(); ++b) {
    out += format_number(kFineEdges[b]) + "," + format_number(kFineEdges[b + 1]) + "," +
           std::to_string(result.fine_bins[b]) + "\n";
  }
  return out;
}

CorrelationResult correlate(const std::vector<ScoreRecord>& a, const std::vector<ScoreRecord>& b) {
  std::unordered_map<std::string, double> bmap;
  for (const auto& s : b) bmap[s.id] = s.score;
  CorrelationResult res;
  std::set<std::string> seen;
  std::vector<double> xs, ys;
  for (const auto& s : a) {
    auto it = bmap.find(s.id);
    if (it == bmap.end() || !seen.insert(s.id).second) continue;
    res.pairs.emplace_back(s.id, s.score, it->second);
    xs.push_back(s.score);
    ys.push_back(it->second);
  }
  if (res.pairs.empty()) throw InvalidArgument("corr: the two score files share no ids");
  res.r = pearson(xs, ys);
  return res;
}

std::string pairs_csv(const CorrelationResult& result) {
  std::string out = "id,a,b\n";
  for (const auto& [id, x, y] : result.pairs) {
    out += csv_field(id) + "," + format_number(x) + "," + format_number(y) + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------

TrainResult run_training(const Config& cfg, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  std::ofstream log(out_dir / "metrics.jsonl", std::ios::binary);
  if (!log) throw IoError("cannot write " + (out_dir / "metrics.jsonl").string());
  TrainHooks hooks;
  hooks.on_iteration = [&log](const nlohmann::json& rec) { log << rec.dump() << "\n" << std::flush; };
  hooks.abort_checkpoint = out_dir / "checkpoint.json";

  TrainResult res = train(cfg, hooks);
  save_checkpoint(res.initial, out_dir / "initial_checkpoint.json");
  save_checkpoint(res.policy, out_dir / "checkpoint.json");

  nlohmann::json summary = {{"iterations", cfg.train.iterations},
                            {"initial_eval", to_json(res.initial_eval)},
                            {"final_eval", to_json(res.final_eval)},
                            {"config", config_to_json(cfg)}};
  std::ofstream(out_dir / "summary.json", std::ios::binary) << summary.dump(2) << "\n";
  return res;
}

}  // namespace cocoedit
