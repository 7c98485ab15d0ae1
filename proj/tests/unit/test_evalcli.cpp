#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "oracles.hpp"

#include "cocoedit/errors.hpp"
#include "cocoedit/evalcli.hpp"
#include "cocoedit/pgm.hpp"

using namespace cocoedit;
namespace fs = std::filesystem;

namespace {

// Grids quantized to 8 bits so the PGM round trip is exact.
Grid2D quantized(std::mt19937_64& rng, std::size_t h, std::size_t w) {
  Grid2D g(h, w);
  std::uniform_int_distribution<int> d(0, 255);
  for (double& v : g.values()) v = d(rng) / 255.0;
  return g;
}

struct Triplets {
  fs::path dir;
  std::vector<ManifestRecord> manifest;
  std::vector<Grid2D> inputs, edits;
  std::vector<EditMask> masks;
};

Triplets write_triplets(const std::string& name, int count) {
  Triplets t;
  t.dir = fs::temp_directory_path() / name;
  fs::remove_all(t.dir);
  fs::create_directories(t.dir);
  std::mt19937_64 rng(11);
  const char* types[] = {"color", "add", "remove"};
  for (int i = 0; i < count; ++i) {
    const Grid2D a = quantized(rng, 16, 20), b = quantized(rng, 16, 20);
    const EditMask m = oracle::random_mask(rng, 16, 20, 0.3);
    const std::string id = "s" + std::to_string(i);
    write_pgm(a, t.dir / (id + "_in.pgm"));
    write_pgm(b, t.dir / (id + "_ed.pgm"));
    write_pgm_mask(m, t.dir / (id + "_m.pgm"));
    t.manifest.push_back({id, t.dir / (id + "_in.pgm"), t.dir / (id + "_ed.pgm"),
                          t.dir / (id + "_m.pgm"), types[i % 3]});
    t.inputs.push_back(a);
    t.edits.push_back(b);
    t.masks.push_back(m);
  }
  return t;
}

std::vector<ScoreRecord> random_scores(std::uint64_t seed, int n) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  std::vector<double> specials{0.0, 9.0, 9.2, 9.4, 9.6, 9.8, 10.0, 8.9999, 9.3, 9.5};
  std::vector<ScoreRecord> out;
  for (int i = 0; i < n; ++i) {
    const double s = i < static_cast<int>(specials.size()) ? specials[i] : std::round(u(rng) * 1000) / 1000;
    out.push_back({"id" + std::to_string(i), s});
  }
  return out;
}

}  // namespace

TEST_SUITE("evalcli") {

TEST_CASE("eval triplets match the oracle") {
  const Triplets t = write_triplets("cocoedit_eval_unit", 9);
  const MetricConfig cfg;
  const EvalReport rep = run_eval(t.manifest, cfg);
  REQUIRE(rep.rows.size() == 9);
  CHECK(rep.failures == 0);
  for (std::size_t i = 0; i < 9; ++i) {
    const EditMask keep = complement(t.masks[i]);
    double se = 0;
    for (std::size_t p = 0; p < keep.size(); ++p)
      if (keep[p]) se += std::pow(t.inputs[i][p] - t.edits[i][p], 2);
    const double mse = se / keep.count();
    CHECK(rep.rows[i].id == t.manifest[i].id);
    CHECK(rep.rows[i].psnr_db == doctest::Approx(10 * std::log10(1 / mse)).epsilon(1e-12));
    CHECK(rep.rows[i].ssim == doctest::Approx(oracle::ssim(t.inputs[i], t.edits[i], keep)).epsilon(1e-10));
    CHECK(rep.rows[i].active_pixel_fraction == doctest::Approx(keep.count() / 320.0));
  }
  // Per-type and overall means.
  REQUIRE(rep.aggregates.size() == 4);
  CHECK(rep.aggregates[0].group == "add");
  CHECK(rep.aggregates.back().group == "*");
  CHECK(rep.aggregates.back().count == 9);
  double sum = 0;
  for (std::size_t i = 1; i < 9; i += 3) sum += rep.rows[i].ssim;
  CHECK(rep.aggregates[0].ssim == doctest::Approx(sum / 3).epsilon(1e-14));

  // Aggregates are bitwise invariant to manifest order.
  auto shuffled = t.manifest;
  std::mt19937_64 rng(3);
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  const EvalReport rep2 = run_eval(shuffled, cfg);
  for (std::size_t k = 0; k < 4; ++k) {
    CHECK(rep2.aggregates[k].psnr_db == rep.aggregates[k].psnr_db);
    CHECK(rep2.aggregates[k].ssim == rep.aggregates[k].ssim);
  }
  const std::string csv = eval_report_csv(rep);
  CHECK(csv.rfind("kind,id,edit_type,psnr_db,psnr_norm,ssim,active_pixel_fraction,error\n", 0) == 0);
  fs::remove_all(t.dir);
}

TEST_CASE("eval records per-sample failures") {
  Triplets t = write_triplets("cocoedit_eval_fail", 2);
  t.manifest[1].edited = t.dir / "missing.pgm";
  const auto rep = run_eval(t.manifest, MetricConfig{});
  CHECK(rep.failures == 1);
  CHECK_FALSE(rep.rows[1].error.empty());
  CHECK(rep.aggregates.back().count == 1);
  // A mask covering everything leaves nothing to score.
  write_pgm_mask(EditMask(16, 20, true), t.dir / "full.pgm");
  t.manifest[0].mask = t.dir / "full.pgm";
  CHECK_FALSE(evaluate_triplet(t.manifest[0], MetricConfig{}).error.empty());
  fs::remove_all(t.dir);
}

TEST_CASE("manifest parsing") {
  const auto m = parse_manifest(
      "{\"id\":\"a\",\"input\":\"x.pgm\",\"edited\":\"y.pgm\",\"mask\":\"/abs/m.pgm\"}\n\n", "/base");
  REQUIRE(m.size() == 1);
  CHECK(m[0].input == fs::path("/base/x.pgm"));
  CHECK(m[0].mask == fs::path("/abs/m.pgm"));
  try {
    parse_manifest("{\"id\":\"a\",\"input\":\"x\",\"edited\":\"y\",\"mask\":\"z\"}\n{\"id\":1}\n", "/");
    FAIL("no error");
  } catch (const ParseError& e) {
    CHECK(e.position() == 2);
  }
}

TEST_CASE("filter threshold is strict") {
  const std::vector<ScoreRecord> s{{"a", 9.3}, {"b", 9.4}, {"c", 9.5}};
  const auto r = filter_scores(s, 9.4);
  CHECK(r.retained == std::vector<std::string>{"c"});
  CHECK(r.rejected == std::vector<std::string>{"a", "b"});
}

TEST_CASE("histogram matches brute-force counting") {
  const auto scores = random_scores(5, 2000);
  const auto r = filter_scores(scores, 9.4);
  std::array<std::size_t, 10> unit{};
  std::array<std::size_t, 5> fine{};
  std::size_t kept = 0;
  for (const auto& s : scores) {
    for (int k = 0; k < 10; ++k)
      if ((s.score >= k && s.score < k + 1) || (k == 9 && s.score == 10.0)) ++unit[k];
    for (int b = 0; b < 5; ++b) {
      const double lo = kFineEdges[b], hi = kFineEdges[b + 1];
      if ((s.score >= lo && s.score < hi) || (b == 4 && s.score == 10.0)) ++fine[b];
    }
    if (s.score > 9.4) ++kept;
  }
  CHECK(r.unit_bins == unit);
  CHECK(r.fine_bins == fine);
  CHECK(r.retained.size() == kept);
  const std::string csv = histogram_csv(r);
  CHECK(csv.find("9.4,9.6,") != std::string::npos);
}

TEST_CASE("score parsing") {
  const auto s = parse_scores("{\"id\":\"a\",\"score\":3}\n{\"id\":\"b\",\"score\":9.5}\n", "t");
  CHECK(s.size() == 2);
  CHECK(s[1].score == 9.5);
  try {
    parse_scores("{\"id\":\"a\",\"score\":3}\n{\"id\":\"b\",\"score\":11}\n", "t", std::make_pair(0.0, 10.0));
    FAIL("no error");
  } catch (const ParseError& e) {
    CHECK(e.position() == 2);
  }
  CHECK_THROWS_AS(parse_scores("{\"id\":\"a\"}\n", "t"), ParseError);
  CHECK_THROWS_AS(parse_scores("not json\n", "t"), ParseError);
}

TEST_CASE("correlation") {
  std::vector<ScoreRecord> a, b, c;
  for (int i = 0; i < 20; ++i) {
    a.push_back({"k" + std::to_string(i), i * 0.5});
    b.push_back({"k" + std::to_string(19 - i), 3.0 * (19 - i) + 1});
    c.push_back({"k" + std::to_string(i), -2.0 * i});
  }
  CHECK(correlate(a, b).r == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(correlate(a, c).r == doctest::Approx(-1.0).epsilon(1e-12));
  b.push_back({"extra", 4.0});
  const auto r = correlate(a, b);
  CHECK(r.pairs.size() == 20);
  CHECK(std::get<0>(r.pairs[0]) == "k0");

  std::mt19937_64 rng(8);
  std::normal_distribution<double> n;
  std::vector<ScoreRecord> x, y;
  std::vector<double> xs, ys;
  for (int i = 0; i < 500; ++i) {
    xs.push_back(n(rng));
    ys.push_back(0.3 * xs.back() + n(rng));
    x.push_back({std::to_string(i), xs.back()});
    y.push_back({std::to_string(i), ys.back()});
  }
  CHECK(std::abs(correlate(x, y).r - oracle::pearson(xs, ys)) <= 1e-10);
  CHECK_THROWS_AS(correlate(a, {{"zz", 1.0}}), InvalidArgument);
  CHECK_THROWS_AS(correlate({{"a", 1.0}, {"b", 1.0}}, {{"a", 2.0}, {"b", 3.0}}), UndefinedCorrelation);
}

TEST_CASE("number formatting round-trips") {
  for (double v : {0.1, 1.0 / 3.0, 9.4, 1e-17, 12345.678})
    CHECK(std::stod(format_number(v)) == v);
}

TEST_CASE("exit code mapping") {
  CHECK(exit_code_for(NumericAbort("x")) == kExitNumeric);
  CHECK(exit_code_for(ConfigError({"a"})) == kExitUsage);
  CHECK(exit_code_for(ParseError("x", 1)) == kExitData);
  CHECK(exit_code_for(IoError("x")) == kExitData);
}

}  // TEST_SUITE
