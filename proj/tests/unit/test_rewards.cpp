#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "oracles.hpp"

#include "cocoedit/errors.hpp"
#include "cocoedit/rewards.hpp"

using namespace cocoedit;

namespace {

// Algorithm-1 optimality recomputed from scratch with population std.
std::vector<double> optimality_oracle(const std::vector<double>& raw) {
  double mean = 0.0;
  for (double r : raw) mean += r;
  mean /= raw.size();
  double var = 0.0;
  for (double r : raw) var += (r - mean) * (r - mean);
  const double z = std::sqrt(var / raw.size()) + 1e-8;
  std::vector<double> out;
  for (double r : raw) {
    double q = (r - mean) / z;
    q = q < -1 ? -1 : (q > 1 ? 1 : q);
    out.push_back(0.5 + 0.5 * q);
  }
  return out;
}

}  // namespace

TEST_SUITE("rewards") {

TEST_CASE("sim reward on hand examples") {
  Grid2D in(16, 16, 0.4);
  EditMask edit(16, 16);
  for (int y = 4; y < 8; ++y)
    for (int x = 4; x < 8; ++x) edit.set(y, x, true);
  CHECK(sim_reward(in, in, edit) == doctest::Approx(1.0));
  // Changes confined to the edit region are invisible.
  Grid2D out = in;
  out(5, 5) = 1.0;
  CHECK(sim_reward(in, out, edit) == doctest::Approx(1.0));
  // w_ssim = 0 reduces to normalized PSNR.
  out(0, 0) = 0.5;
  const double want = masked_psnr_norm(in, out, complement(edit)).value;
  CHECK(sim_reward(in, out, edit, {}, 0.0) == doctest::Approx(want));
}

TEST_CASE("combine is the weighted sum") {
  const RewardWeights w;
  CHECK(w.lambda_mllm == 0.8);
  CHECK(w.lambda_sim == 0.2);
  CHECK(w.w_ssim == 0.5);
  CHECK(combine(1.0, 0.0, w) == doctest::Approx(0.8));
  CHECK(combine(0.0, 1.0, w) == doctest::Approx(0.2));
  CHECK(combine(0.5, 0.5, w) == doctest::Approx(0.5));
  CHECK_THROWS_AS((RewardWeights{-0.1, 0.2, 0.5}.validate()), InvalidArgument);
  CHECK_THROWS_AS((RewardWeights{0.0, 0.0, 0.5}.validate()), InvalidArgument);
}

TEST_CASE("group normalization") {
  const std::vector<double> raw{1.0, 2.0, 3.0};
  const auto c = normalize_group(raw);
  CHECK(c[0] == -1.0);
  CHECK(c[1] == 0.0);
  CHECK(c[2] == 1.0);
  CHECK_THROWS_AS(normalize_group(std::vector<double>{1.0}), InvalidArgument);
}

TEST_CASE("optimality probability examples") {
  const std::vector<double> zeros(5, 0.0);
  for (double v : optimality_probability(zeros).values) CHECK(v == 0.5);

  ZcSpec fixed{ZcMode::Fixed, 2.0};
  const auto o = optimality_probability(std::vector<double>{2.0, -2.0, 5.0, 0.0}, fixed);
  CHECK(o.values[0] == 1.0);
  CHECK(o.values[1] == 0.0);
  CHECK(o.values[2] == 1.0);
  CHECK(o.values[3] == 0.5);

  ZcSpec maxabs{ZcMode::MaxAbs, 1.0};
  const auto m = optimality_probability(std::vector<double>{-0.5, 0.25, 0.25}, maxabs);
  CHECK(m.values[0] == doctest::Approx(0.0).epsilon(1e-7));
  CHECK(m.values[1] == doctest::Approx(0.75).epsilon(1e-7));

  CHECK(parse_zc_mode("std") == ZcMode::GroupStd);
  CHECK(to_string(parse_zc_mode("maxabs")) == "maxabs");
  CHECK_THROWS_AS(parse_zc_mode("median"), InvalidArgument);
}

TEST_CASE("optimality matches the formula on random groups") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int g = 0; g < 200; ++g) {
    std::vector<double> raw(12);
    for (double& r : raw) r = u(rng);
    const auto want = optimality_oracle(raw);
    const auto got = optimality_probability(normalize_group(raw)).values;
    for (std::size_t i = 0; i < raw.size(); ++i) CHECK(std::abs(got[i] - want[i]) <= 1e-12);
    // Monotone, bounded, shift-invariant.
    for (std::size_t i = 0; i < raw.size(); ++i)
      for (std::size_t j = 0; j < raw.size(); ++j)
        if (raw[i] >= raw[j]) CHECK(got[i] >= got[j]);
    std::vector<double> shifted = raw;
    for (double& r : shifted) r += 3.25;
    const auto s = optimality_probability(normalize_group(shifted)).values;
    for (std::size_t i = 0; i < raw.size(); ++i) {
      CHECK(got[i] >= 0.0);
      CHECK(got[i] <= 1.0);
      CHECK(std::abs(s[i] - got[i]) < 1e-12);
    }
  }
}

TEST_CASE("assemble_group on a three-sample group") {
  const std::vector<double> mllm{0.9, 0.5, 0.1}, sim{0.2, 0.6, 1.0};
  const auto g = assemble_group(mllm, sim, RewardWeights{}, ZcSpec{});
  const std::vector<double> raw{0.8 * 0.9 + 0.2 * 0.2, 0.8 * 0.5 + 0.2 * 0.6, 0.8 * 0.1 + 0.2 * 1.0};
  const auto want = optimality_oracle(raw);
  for (int i = 0; i < 3; ++i) {
    CHECK(g.raw[i] == doctest::Approx(raw[i]));
    CHECK(g.optimality[i] == doctest::Approx(want[i]).epsilon(1e-12));
  }
  CHECK(g.optimality[0] == *std::max_element(g.optimality.begin(), g.optimality.end()));
}

TEST_CASE("file provider") {
  auto p = FileRewardProvider::from_string(
      "{\"id\":\"a\",\"score\":8.0}\n\n{\"id\":\"b\",\"score\":3}\n{\"id\":\"a\",\"score\":10}\n");
  CHECK(p.lookup("b") == doctest::Approx(0.3));
  CHECK(p.lookup("a") == doctest::Approx(1.0));
  CHECK(p.warnings().size() == 1);
  CHECK_THROWS_AS(p.lookup("zzz"), LookupError);

  auto single = FileRewardProvider::from_string("{\"id\":\"a\",\"score\":8.0}\n");
  CHECK(single.lookup("a") == doctest::Approx(0.8));
  CHECK(single.warnings().empty());

  try {
    FileRewardProvider::from_string("{\"id\":\"a\",\"score\":1}\nnot json\n");
    FAIL("malformed line accepted");
  } catch (const ParseError& e) {
    CHECK(e.position() == 2);
  }
  CHECK_THROWS_AS(FileRewardProvider::from_string("{\"id\":\"a\",\"score\":11}\n"), ParseError);
  CHECK_THROWS_AS(FileRewardProvider::from_string("{\"id\":\"a\"}\n"), ParseError);

  const Grid2D in(2, 2);
  std::vector<Grid2D> samples{in, in};
  std::vector<std::string> ids{"b", "a"};
  const auto s = p.score(RewardQuery{in, nullptr, samples, ids});
  CHECK(s[0] == doctest::Approx(0.3));
  CHECK(s[1] == doctest::Approx(1.0));
}

TEST_CASE("oracle provider") {
  EditMask region(4, 4);
  region.set(1, 1, true);
  region.set(1, 2, true);
  const EditSpec spec{region, 0.8, 0.5};
  Grid2D g(4, 4, 0.2);
  g(1, 1) = 0.8;
  g(1, 2) = 0.8;
  CHECK(OracleRewardProvider::score_one(g, spec) == 1.0);
  g(1, 1) = 0.6;  // mean 0.7, gap 0.1
  CHECK(OracleRewardProvider::score_one(g, spec) == doctest::Approx(0.8));
  const Grid2D untouched(4, 4, 0.2);  // gap 0.6 > scale
  CHECK(OracleRewardProvider::score_one(untouched, spec) == 0.0);
  Grid2D same_mean(4, 4, 0.9);
  same_mean(1, 1) = 0.5;
  same_mean(1, 2) = 0.9;
  CHECK(OracleRewardProvider::score_one(same_mean, spec) == OracleRewardProvider::score_one(g, spec));

  auto bound = provider_synthetic_oracle(spec);
  std::vector<Grid2D> samples{g, untouched};
  const auto s = bound->score(RewardQuery{untouched, nullptr, samples, {}});
  CHECK(s[0] == doctest::Approx(0.8));
  CHECK(s[1] == 0.0);
  auto unbound = provider_synthetic_oracle();
  CHECK_THROWS_AS(unbound->score(RewardQuery{untouched, nullptr, samples, {}}), InvalidArgument);
  CHECK(unbound->score(RewardQuery{untouched, &spec, samples, {}}) == s);
}

TEST_CASE("constant provider and cache") {
  auto c = provider_constant(0.25);
  const Grid2D in(2, 2);
  std::vector<Grid2D> samples{in, in, in};
  CHECK(c->score(RewardQuery{in, nullptr, samples, {}}) == std::vector<double>(3, 0.25));
  CHECK_THROWS_AS(provider_constant(1.5), InvalidArgument);

  RewardCache cache;
  Grid2D a(2, 2, 0.1), b(2, 2, 0.1);
  b[3] = 0.2;
  CHECK(content_hash(a) != content_hash(b));
  CHECK(content_hash(a) == content_hash(Grid2D(2, 2, 0.1)));
  CHECK(content_hash(Grid2D(1, 4, 0.1)) != content_hash(a));
  CHECK_FALSE(cache.get("p", content_hash(a)).has_value());
  cache.put("p", content_hash(a), 0.7);
  CHECK(cache.get("p", content_hash(a)).value() == 0.7);
  CHECK_FALSE(cache.get("q", content_hash(a)).has_value());
  CHECK(cache.size() == 1);
  cache.clear();
  CHECK(cache.size() == 0);
}

}  // TEST_SUITE
