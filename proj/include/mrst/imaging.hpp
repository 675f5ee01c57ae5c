#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace mrst {

/// 2D scalar field, row-major, in modified Hounsfield units (air 0, water 1000).
class Image {
 public:
  Image() = default;
  Image(std::size_t width, std::size_t height, double pixel_size = 1.0, double fill = 0.0);
  Image(std::size_t width, std::size_t height, double pixel_size, std::vector<double> data);

  std::size_t width() const noexcept { return width_; }
  std::size_t height() const noexcept { return height_; }
  std::size_t size() const noexcept { return data_.size(); }
  double pixel_size() const noexcept { return pixel_size_; }

  double& operator()(std::size_t row, std::size_t col) { return data_[row * width_ + col]; }
  double operator()(std::size_t row, std::size_t col) const { return data_[row * width_ + col]; }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  std::vector<double>& values() noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  bool same_shape(const Image& other) const noexcept {
    return width_ == other.width_ && height_ == other.height_;
  }

  /// Throws InputError if any pixel is NaN or infinite.
  void check_finite(const char* what) const;

  friend bool operator==(const Image&, const Image&) = default;

 private:
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  double pixel_size_ = 1.0;
  std::vector<double> data_;
};

/// Sliding-window patch geometry. Windows never wrap around the border.
struct PatchConfig {
  std::size_t patch_side = 8;
  std::size_t stride = 1;

  std::size_t patch_size() const noexcept { return patch_side * patch_side; }

  /// Throws ConfigError unless 1 <= stride <= patch_side <= min(width, height).
  void validate(std::size_t width, std::size_t height) const;

  /// Number of window origins along an axis. When the stride does not divide
  /// evenly, one extra window is placed flush with the far border.
  std::size_t positions(std::size_t extent) const noexcept {
    return (extent - patch_side + stride - 1) / stride + 1;
  }
  std::size_t origin(std::size_t k, std::size_t extent) const noexcept {
    const std::size_t o = k * stride;
    return o + patch_side > extent ? extent - patch_side : o;
  }
  std::size_t count(std::size_t width, std::size_t height) const noexcept {
    return positions(width) * positions(height);
  }
};

/// p x n dense matrix stored column-major; column j is one vectorized patch.
class PatchMatrix {
 public:
  PatchMatrix() = default;
  PatchMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[c * rows_ + r]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[c * rows_ + r]; }

  std::span<double> col(std::size_t c) { return {data_.data() + c * rows_, rows_}; }
  std::span<const double> col(std::size_t c) const { return {data_.data() + c * rows_, rows_}; }

  double* raw() noexcept { return data_.data(); }
  const double* raw() const noexcept { return data_.data(); }
  std::vector<double>& values() noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  bool same_shape(const PatchMatrix& o) const noexcept {
    return rows_ == o.rows_ && cols_ == o.cols_;
  }

  friend bool operator==(const PatchMatrix&, const PatchMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Column j holds the row-major vectorization of the j-th window; windows are
/// enumerated row of origins first, then column, with step `stride`.
PatchMatrix extract_patches(const Image& img, const PatchConfig& cfg);

/// Adjoint of extract_patches: every column is added back into its window.
Image accumulate_patches(const PatchMatrix& pm, const PatchConfig& cfg, std::size_t width,
                         std::size_t height, double pixel_size = 1.0);

/// Number of windows covering each pixel (the diagonal of sum_j P_j^T P_j).
Image overlap_counts(const PatchConfig& cfg, std::size_t width, std::size_t height,
                     double pixel_size = 1.0);

}  // namespace mrst
