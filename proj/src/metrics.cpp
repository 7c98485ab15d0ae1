#include "cocoedit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "cocoedit/errors.hpp"

namespace cocoedit {

MetricConfig MetricConfig::with_max_intensity(double max_i) {
  MetricConfig cfg;
  cfg.max_intensity = max_i;
  cfg.c1 = (0.01 * max_i) * (0.01 * max_i);
  cfg.c2 = (0.03 * max_i) * (0.03 * max_i);
  return cfg;
}

void MetricConfig::validate() const {
  if (!(tau_db > 0.0)) throw InvalidArgument("metrics: tau_db must be positive");
  if (!(max_intensity > 0.0)) throw InvalidArgument("metrics: max_intensity must be positive");
  if (!(c1 > 0.0) || !(c2 > 0.0)) throw InvalidArgument("metrics: c1 and c2 must be positive");
  if (window.weights.empty()) throw InvalidArgument("metrics: window not initialized");
}

namespace {

std::size_t check_inputs(const Grid2D& a, const Grid2D& b, const EditMask& region,
                         const char* who) {
  if (!a.same_shape(b) || !region.same_shape(a)) {
    throw InvalidArgument(std::string(who) + ": shape mismatch");
  }
  const std::size_t n = region.count();
  if (n == 0) throw EmptyRegionError(std::string(who) + ": evaluated region is empty");
  return n;
}

using ConvolveFn = Grid2D (*)(const Grid2D&, const GaussianWindow&);

Grid2D ssim_map_impl(const Grid2D& a, const Grid2D& b, const EditMask& region,
                     const MetricConfig& cfg, ConvolveFn conv) {
  const Grid2D m = region.as_grid();
  Grid2D am(a.height(), a.width()), bm = am, aam = am, bbm = am, abm = am;
  for (std::size_t i = 0; i < a.size(); ++i) {
    am[i] = a[i] * m[i];
    bm[i] = b[i] * m[i];
    aam[i] = a[i] * a[i] * m[i];
    bbm[i] = b[i] * b[i] * m[i];
    abm[i] = a[i] * b[i] * m[i];
  }
  const Grid2D area = conv(m, cfg.window);
  const Grid2D sa = conv(am, cfg.window);
  const Grid2D sb = conv(bm, cfg.window);
  const Grid2D saa = conv(aam, cfg.window);
  const Grid2D sbb = conv(bbm, cfg.window);
  const Grid2D sab = conv(abm, cfg.window);

  Grid2D s(a.height(), a.width());
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!region[i]) continue;
    // area[i] > 0 here: the window centre weight is positive and m_i = 1.
    const double inv = 1.0 / area[i];
    const double mu_a = sa[i] * inv;
    const double mu_b = sb[i] * inv;
    const double var_a = std::max(0.0, saa[i] * inv - mu_a * mu_a);
    const double var_b = std::max(0.0, sbb[i] * inv - mu_b * mu_b);
    const double cov = sab[i] * inv - mu_a * mu_b;
    s[i] = ((2.0 * mu_a * mu_b + cfg.c1) * (2.0 * cov + cfg.c2)) /
           ((mu_a * mu_a + mu_b * mu_b + cfg.c1) * (var_a + var_b + cfg.c2));
  }
  return s;
}

MaskedScore ssim_impl(const Grid2D& a, const Grid2D& b, const EditMask& region,
                      const MetricConfig& cfg, ConvolveFn conv) {
  const std::size_t n = check_inputs(a, b, region, "masked_ssim");
  const Grid2D s = ssim_map_impl(a, b, region, cfg, conv);
  double acc = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (region[i]) acc += s[i];
  return {acc / static_cast<double>(n), n};
}

Grid2D parallel_conv(const Grid2D& g, const GaussianWindow& w) { return convolve_same(g, w); }
Grid2D serial_conv(const Grid2D& g, const GaussianWindow& w) { return serial::convolve_same(g, w); }

}  // namespace

MaskedScore masked_mse(const Grid2D& a, const Grid2D& b, const EditMask& region,
                       const MetricConfig&) {
  const std::size_t n = check_inputs(a, b, region, "masked_mse");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!region[i]) continue;
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return {acc / static_cast<double>(n), n};
}

double psnr_db_from_mse(double mse, double max_intensity) {
  if (mse <= 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(max_intensity * max_intensity / mse);
}

double normalize_psnr(double psnr_db, double tau_db) {
  if (std::isinf(psnr_db) && psnr_db > 0) return 1.0;
  return std::clamp(psnr_db / tau_db, 0.0, 1.0);
}

double masked_psnr_db(const Grid2D& a, const Grid2D& b, const EditMask& region,
                      const MetricConfig& cfg) {
  return psnr_db_from_mse(masked_mse(a, b, region, cfg).value, cfg.max_intensity);
}

MaskedScore masked_psnr_norm(const Grid2D& a, const Grid2D& b, const EditMask& region,
                             const MetricConfig& cfg) {
  const MaskedScore mse = masked_mse(a, b, region, cfg);
  return {normalize_psnr(psnr_db_from_mse(mse.value, cfg.max_intensity), cfg.tau_db),
          mse.active_pixels};
}

MaskedScore masked_ssim(const Grid2D& a, const Grid2D& b, const EditMask& region,
                        const MetricConfig& cfg) {
  return ssim_impl(a, b, region, cfg, parallel_conv);
}

Grid2D masked_ssim_map(const Grid2D& a, const Grid2D& b, const EditMask& region,
                       const MetricConfig& cfg) {
  check_inputs(a, b, region, "masked_ssim_map");
  return ssim_map_impl(a, b, region, cfg, parallel_conv);
}

namespace serial {
MaskedScore masked_ssim(const Grid2D& a, const Grid2D& b, const EditMask& region,
                        const MetricConfig& cfg) {
  return ssim_impl(a, b, region, cfg, serial_conv);
}
}  // namespace serial

double pearson(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw InvalidArgument("pearson: length mismatch");
  if (xs.size() < 2) throw InvalidArgument("pearson: need at least two points");
  // Single-pass co-moment update (Welford).
  double mx = 0.0, my = 0.0, sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double n = static_cast<double>(i + 1);
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    mx += dx / n;
    my += dy / n;
    sxx += dx * (xs[i] - mx);
    syy += dy * (ys[i] - my);
    sxy += dx * (ys[i] - my);
  }
  if (sxx <= 0.0 || syy <= 0.0) {
    throw UndefinedCorrelation("pearson: correlation undefined for a constant sequence");
  }
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

}  // namespace cocoedit
