#include "mrst/imaging.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mrst/error.hpp"
#include "mrst/parallel.hpp"

namespace mrst {

Image::Image(std::size_t width, std::size_t height, double pixel_size, double fill)
    : width_(width), height_(height), pixel_size_(pixel_size), data_(width * height, fill) {}

Image::Image(std::size_t width, std::size_t height, double pixel_size, std::vector<double> data)
    : width_(width), height_(height), pixel_size_(pixel_size), data_(std::move(data)) {
  if (data_.size() != width_ * height_) {
    throw ConfigError("image data length " + std::to_string(data_.size()) + " != " +
                      std::to_string(width_) + "x" + std::to_string(height_));
  }
}

void Image::check_finite(const char* what) const {
  for (std::size_t i = 0; i < data_.size(); ++i) {
    if (!std::isfinite(data_[i])) {
      throw InputError(std::string(what) + ": non-finite pixel at index " + std::to_string(i));
    }
  }
}

void PatchConfig::validate(std::size_t width, std::size_t height) const {
  if (stride < 1 || stride > patch_side) {
    throw ConfigError("patch stride " + std::to_string(stride) + " must lie in [1, " +
                      std::to_string(patch_side) + "]");
  }
  if (patch_side < 1 || patch_side > std::min(width, height)) {
    throw ConfigError("patch side " + std::to_string(patch_side) + " does not fit a " +
                      std::to_string(width) + "x" + std::to_string(height) + " image");
  }
}

PatchMatrix extract_patches(const Image& img, const PatchConfig& cfg) {
  cfg.validate(img.width(), img.height());
  const std::size_t side = cfg.patch_side;
  const std::size_t nx = cfg.positions(img.width());
  const std::size_t ny = cfg.positions(img.height());
  PatchMatrix pm(cfg.patch_size(), nx * ny);
  const double* src = img.data().data();
  const std::size_t w = img.width();
  parallel_for(ny, [&](std::size_t b, std::size_t e) {
    for (std::size_t py = b; py < e; ++py) {
      for (std::size_t px = 0; px < nx; ++px) {
        double* dst = pm.col(py * nx + px).data();
        const double* origin = src + cfg.origin(py, img.height()) * w + cfg.origin(px, w);
        for (std::size_t r = 0; r < side; ++r) {
          std::copy_n(origin + r * w, side, dst + r * side);
        }
      }
    }
  }, 4);
  return pm;
}

Image accumulate_patches(const PatchMatrix& pm, const PatchConfig& cfg, std::size_t width,
                         std::size_t height, double pixel_size) {
  cfg.validate(width, height);
  const std::size_t side = cfg.patch_side;
  const std::size_t nx = cfg.positions(width);
  const std::size_t ny = cfg.positions(height);
  if (pm.rows() != cfg.patch_size() || pm.cols() != nx * ny) {
    throw ConfigError("patch matrix " + std::to_string(pm.rows()) + "x" +
                      std::to_string(pm.cols()) + " does not match " + std::to_string(width) +
                      "x" + std::to_string(height) + " image with patch side " +
                      std::to_string(side));
  }
  Image out(width, height, pixel_size);
  double* dst = out.data().data();
  // Sequential over windows so overlapping writes stay race-free and ordered.
  for (std::size_t py = 0; py < ny; ++py) {
    for (std::size_t px = 0; px < nx; ++px) {
      const double* src = pm.col(py * nx + px).data();
      double* origin = dst + cfg.origin(py, height) * width + cfg.origin(px, width);
      for (std::size_t r = 0; r < side; ++r) {
        double* row = origin + r * width;
        const double* s = src + r * side;
        for (std::size_t c = 0; c < side; ++c) row[c] += s[c];
      }
    }
  }
  return out;
}

Image overlap_counts(const PatchConfig& cfg, std::size_t width, std::size_t height,
                     double pixel_size) {
  cfg.validate(width, height);
  const std::size_t nx = cfg.positions(width);
  const std::size_t ny = cfg.positions(height);
  // Counts separate into row and column factors.
  auto axis = [&](std::size_t extent, std::size_t n) {
    std::vector<double> c(extent, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
      for (std::size_t t = 0; t < cfg.patch_side; ++t) c[cfg.origin(k, extent) + t] += 1.0;
    }
    return c;
  };
  const auto cx = axis(width, nx);
  const auto cy = axis(height, ny);
  Image out(width, height, pixel_size);
  for (std::size_t r = 0; r < height; ++r) {
    for (std::size_t c = 0; c < width; ++c) out(r, c) = cy[r] * cx[c];
  }
  return out;
}

}  // namespace mrst
