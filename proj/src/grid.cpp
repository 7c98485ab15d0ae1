#include "cocoedit/grid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cocoedit/errors.hpp"
#include "cocoedit/parallel.hpp"

namespace cocoedit {

Grid2D::Grid2D(std::size_t height, std::size_t width, double fill)
    : height_(height), width_(width), values_(height * width, fill) {}

Grid2D::Grid2D(std::size_t height, std::size_t width, std::vector<double> values)
    : height_(height), width_(width), values_(std::move(values)) {
  if (values_.size() != height_ * width_) {
    throw InvalidArgument("Grid2D: value count " + std::to_string(values_.size()) +
                          " does not match " + std::to_string(height_) + "x" +
                          std::to_string(width_));
  }
}

bool Grid2D::in_unit_range() const noexcept {
  return std::all_of(values_.begin(), values_.end(),
                     [](double v) { return v >= 0.0 && v <= 1.0; });
}

Grid2D Grid2D::clamped_unit() const {
  Grid2D out = *this;
  for (double& v : out.values_) v = std::clamp(v, 0.0, 1.0);
  return out;
}

EditMask::EditMask(std::size_t height, std::size_t width, std::uint8_t fill)
    : height_(height), width_(width), bits_(height * width, fill ? 1 : 0) {}

EditMask::EditMask(std::size_t height, std::size_t width, std::vector<std::uint8_t> bits)
    : height_(height), width_(width), bits_(std::move(bits)) {
  if (bits_.size() != height_ * width_) {
    throw InvalidArgument("EditMask: bit count does not match shape");
  }
  for (std::size_t i = 0; i < bits_.size(); ++i) {
    if (bits_[i] > 1) {
      throw InvalidMaskError("EditMask: entry " + std::to_string(i) + " is " +
                             std::to_string(bits_[i]) + ", expected 0 or 1");
    }
  }
}

std::size_t EditMask::count() const noexcept {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

Grid2D EditMask::as_grid() const {
  Grid2D g(height_, width_);
  for (std::size_t i = 0; i < bits_.size(); ++i) g[i] = bits_[i];
  return g;
}

GaussianWindow gaussian_window(int size, double sigma) {
  if (size < 1 || size % 2 == 0) {
    throw InvalidArgument("gaussian_window: size must be odd and >= 1, got " + std::to_string(size));
  }
  if (!(sigma > 0.0)) throw InvalidArgument("gaussian_window: sigma must be positive");

  GaussianWindow w;
  w.size = size;
  w.sigma = sigma;
  const int r = size / 2;
  w.taps.resize(size);
  double total = 0.0;
  for (int i = -r; i <= r; ++i) {
    w.taps[i + r] = std::exp(-(i * i) / (2.0 * sigma * sigma));
    total += w.taps[i + r];
  }
  for (double& t : w.taps) t /= total;

  w.weights.resize(static_cast<std::size_t>(size) * size);
  double sum2 = 0.0;
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) sum2 += w.weights[y * size + x] = w.taps[y] * w.taps[x];
  for (double& v : w.weights) v /= sum2;
  return w;
}

namespace {

// Separable pass along one axis with zero padding.
void pass_rows(const Grid2D& in, Grid2D& out, const std::vector<double>& taps, int threads) {
  const long h = static_cast<long>(in.height());
  const long wd = static_cast<long>(in.width());
  const int r = static_cast<int>(taps.size() / 2);
#pragma omp parallel for num_threads(threads) schedule(static)
  for (long y = 0; y < h; ++y) {
    for (long x = 0; x < wd; ++x) {
      double acc = 0.0;
      for (int k = -r; k <= r; ++k) {
        const long xx = x + k;
        if (xx < 0 || xx >= wd) continue;
        acc += taps[k + r] * in(y, xx);
      }
      out(y, x) = acc;
    }
  }
}

void pass_cols(const Grid2D& in, Grid2D& out, const std::vector<double>& taps, int threads) {
  const long h = static_cast<long>(in.height());
  const long wd = static_cast<long>(in.width());
  const int r = static_cast<int>(taps.size() / 2);
#pragma omp parallel for num_threads(threads) schedule(static)
  for (long y = 0; y < h; ++y) {
    for (long x = 0; x < wd; ++x) {
      double acc = 0.0;
      for (int k = -r; k <= r; ++k) {
        const long yy = y + k;
        if (yy < 0 || yy >= h) continue;
        acc += taps[k + r] * in(yy, x);
      }
      out(y, x) = acc;
    }
  }
}

}  // namespace

Grid2D convolve_same(const Grid2D& grid, const GaussianWindow& window) {
  if (grid.empty()) throw InvalidArgument("convolve_same: empty grid");
  if (window.taps.size() != static_cast<std::size_t>(window.size)) {
    return serial::convolve_same(grid, window);
  }
  const int threads = thread_count();
  Grid2D tmp(grid.height(), grid.width());
  Grid2D out(grid.height(), grid.width());
  pass_rows(grid, tmp, window.taps, threads);
  pass_cols(tmp, out, window.taps, threads);
  return out;
}

namespace serial {

Grid2D convolve_same(const Grid2D& grid, const GaussianWindow& window) {
  if (grid.empty()) throw InvalidArgument("convolve_same: empty grid");
  const long h = static_cast<long>(grid.height());
  const long wd = static_cast<long>(grid.width());
  const int r = window.radius();
  Grid2D out(grid.height(), grid.width());
  for (long y = 0; y < h; ++y) {
    for (long x = 0; x < wd; ++x) {
      double acc = 0.0;
      for (int dy = -r; dy <= r; ++dy) {
        const long yy = y + dy;
        if (yy < 0 || yy >= h) continue;
        for (int dx = -r; dx <= r; ++dx) {
          const long xx = x + dx;
          if (xx < 0 || xx >= wd) continue;
          acc += window.at(dy, dx) * grid(yy, xx);
        }
      }
      out(y, x) = acc;
    }
  }
  return out;
}

}  // namespace serial

EditMask dilate(const EditMask& mask, int radius) {
  if (radius < 0) throw InvalidArgument("dilate: radius must be non-negative");
  if (radius == 0) return mask;
  const long h = static_cast<long>(mask.height());
  const long w = static_cast<long>(mask.width());
  // Square element is separable: dilate rows, then columns.
  std::vector<std::uint8_t> rows(mask.size(), 0), out(mask.size(), 0);
  for (long y = 0; y < h; ++y)
    for (long x = 0; x < w; ++x) {
      if (!mask(y, x)) continue;
      for (long xx = std::max(0L, x - radius); xx <= std::min(w - 1, x + radius); ++xx)
        rows[y * w + xx] = 1;
    }
  for (long y = 0; y < h; ++y)
    for (long x = 0; x < w; ++x) {
      if (!rows[y * w + x]) continue;
      for (long yy = std::max(0L, y - radius); yy <= std::min(h - 1, y + radius); ++yy)
        out[yy * w + x] = 1;
    }
  return EditMask(mask.height(), mask.width(), std::move(out));
}

EditMask downsample_mask(const EditMask& mask, std::size_t factor) {
  if (factor == 0) throw InvalidArgument("downsample_mask: factor must be positive");
  if (mask.height() % factor != 0 || mask.width() % factor != 0) {
    throw InvalidArgument("downsample_mask: shape " + std::to_string(mask.height()) + "x" +
                          std::to_string(mask.width()) + " not divisible by " +
                          std::to_string(factor));
  }
  const std::size_t oh = mask.height() / factor, ow = mask.width() / factor;
  EditMask out(oh, ow);
  for (std::size_t y = 0; y < mask.height(); ++y)
    for (std::size_t x = 0; x < mask.width(); ++x)
      if (mask(y, x)) out.set(y / factor, x / factor, true);
  return out;
}

EditMask complement(const EditMask& mask) {
  std::vector<std::uint8_t> bits(mask.size());
  for (std::size_t i = 0; i < mask.size(); ++i) bits[i] = mask[i] ? 0 : 1;
  return EditMask(mask.height(), mask.width(), std::move(bits));
}

Grid2D hadamard(const Grid2D& a, const Grid2D& b) {
  if (!a.same_shape(b)) throw InvalidArgument("hadamard: shape mismatch");
  Grid2D out(a.height(), a.width());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  return out;
}

}  // namespace cocoedit
