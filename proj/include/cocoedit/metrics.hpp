#pragma once

#include <cstddef>
#include <span>

#include "cocoedit/grid.hpp"

namespace cocoedit {

struct MetricConfig {
  double tau_db = 40.0;          // normalization factor for masked PSNR
  double max_intensity = 1.0;
  GaussianWindow window = gaussian_window(11, 1.5);
  double c1 = 0.01 * 0.01;       // (0.01 * MAX_I)^2
  double c2 = 0.03 * 0.03;       // (0.03 * MAX_I)^2

  /// Standard SSIM constants for the given MAX_I.
  static MetricConfig with_max_intensity(double max_i);
  void validate() const;
};

struct MaskedScore {
  double value = 0.0;
  std::size_t active_pixels = 0;
};

// All masked metrics take the region to EVALUATE (1 = pixel counts). For
// consistency scoring that is complement(edit_mask).

MaskedScore masked_mse(const Grid2D& a, const Grid2D& b, const EditMask& region,
                       const MetricConfig& cfg = {});

/// Raw masked PSNR in dB; +inf when the masked MSE is zero.
double masked_psnr_db(const Grid2D& a, const Grid2D& b, const EditMask& region,
                      const MetricConfig& cfg = {});

/// clip(PSNR_dB / tau_db, 0, 1), with MSE = 0 mapped to exactly 1.
MaskedScore masked_psnr_norm(const Grid2D& a, const Grid2D& b, const EditMask& region,
                             const MetricConfig& cfg = {});

/// Normalized-convolution PSNR conversion shared by eval and rewards.
double psnr_db_from_mse(double mse, double max_intensity);
double normalize_psnr(double psnr_db, double tau_db);

/// SSIM restricted to `region` via normalized convolution.
MaskedScore masked_ssim(const Grid2D& a, const Grid2D& b, const EditMask& region,
                        const MetricConfig& cfg = {});

/// Local SSIM map (defined where region = 1, 0 elsewhere).
Grid2D masked_ssim_map(const Grid2D& a, const Grid2D& b, const EditMask& region,
                       const MetricConfig& cfg = {});

/// Sample Pearson correlation. Throws UndefinedCorrelation if either input is
/// constant, InvalidArgument on length mismatch or fewer than two points.
double pearson(std::span<const double> xs, std::span<const double> ys);

namespace serial {
MaskedScore masked_ssim(const Grid2D& a, const Grid2D& b, const EditMask& region,
                        const MetricConfig& cfg = {});
}  // namespace serial

}  // namespace cocoedit
