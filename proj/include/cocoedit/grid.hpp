#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace cocoedit {

/// Dense row-major H×W array of doubles. Used for images (values in [0,1]),
/// latents (unconstrained) and intermediate maps such as SSIM maps.
class Grid2D {
 public:
  Grid2D() = default;
  Grid2D(std::size_t height, std::size_t width, double fill = 0.0);
  Grid2D(std::size_t height, std::size_t width, std::vector<double> values);

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  double& operator()(std::size_t row, std::size_t col) { return values_[row * width_ + col]; }
  double operator()(std::size_t row, std::size_t col) const { return values_[row * width_ + col]; }
  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }

  bool same_shape(const Grid2D& other) const noexcept {
    return height_ == other.height_ && width_ == other.width_;
  }

  /// True when every value lies in [0,1] (image-role grids).
  bool in_unit_range() const noexcept;

  /// Copy with every value clamped to [0,1].
  Grid2D clamped_unit() const;

  friend bool operator==(const Grid2D&, const Grid2D&) = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<double> values_;
};

/// Binary H×W mask. Always stored in the edit orientation: 1 marks the edit
/// region. Non-edit regions are obtained with `complement`.
class EditMask {
 public:
  EditMask() = default;
  EditMask(std::size_t height, std::size_t width, std::uint8_t fill = 0);
  /// Throws InvalidMaskError if any entry is not 0 or 1.
  EditMask(std::size_t height, std::size_t width, std::vector<std::uint8_t> bits);

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t size() const noexcept { return bits_.size(); }

  std::uint8_t operator()(std::size_t row, std::size_t col) const { return bits_[row * width_ + col]; }
  std::uint8_t operator[](std::size_t i) const { return bits_[i]; }
  void set(std::size_t row, std::size_t col, bool on) { bits_[row * width_ + col] = on ? 1 : 0; }
  void set(std::size_t i, bool on) { bits_[i] = on ? 1 : 0; }

  std::span<const std::uint8_t> bits() const noexcept { return bits_; }

  std::size_t count() const noexcept;
  bool none() const noexcept { return count() == 0; }
  bool all() const noexcept { return count() == bits_.size(); }

  template <class G>
  bool same_shape(const G& other) const noexcept {
    return height_ == other.height() && width_ == other.width();
  }

  /// Mask as a 0/1 real grid, for multiplication into images.
  Grid2D as_grid() const;

  friend bool operator==(const EditMask&, const EditMask&) = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<std::uint8_t> bits_;
};

/// Normalized separable Gaussian window (size odd).
struct GaussianWindow {
  int size = 1;
  double sigma = 1.0;
  std::vector<double> taps;     // 1-D factor, sums to 1
  std::vector<double> weights;  // size*size, row-major outer product of taps

  int radius() const noexcept { return size / 2; }
  double at(int dy, int dx) const { return weights[(dy + radius()) * size + (dx + radius())]; }
};

GaussianWindow gaussian_window(int size = 11, double sigma = 1.5);

/// Same-shape correlation with zero padding. Parallel over rows.
Grid2D convolve_same(const Grid2D& grid, const GaussianWindow& window);

/// Square (Chebyshev) dilation.
EditMask dilate(const EditMask& mask, int radius);

/// Any-pooling over factor×factor cells.
EditMask downsample_mask(const EditMask& mask, std::size_t factor);

EditMask complement(const EditMask& mask);

/// Elementwise a ⊙ b.
Grid2D hadamard(const Grid2D& a, const Grid2D& b);

namespace serial {
/// Single-threaded reference for `convolve_same`; kept for tests and the
/// kernel benchmark.
Grid2D convolve_same(const Grid2D& grid, const GaussianWindow& window);
}  // namespace serial

}  // namespace cocoedit
