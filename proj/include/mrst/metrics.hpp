#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "mrst/imaging.hpp"

namespace mrst::metrics {

/// Pixels whose centre lies inside a disk about the image centre.
struct RoiMask {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> inside;
  std::size_t n_roi = 0;

  bool contains(std::size_t row, std::size_t col) const { return inside[row * width + col] != 0; }
};

/// Radius = radius_fraction * min(width, height) / 2, 0 < radius_fraction <= 1.
RoiMask circular_roi(std::size_t width, std::size_t height, double radius_fraction);

/// Mask covering every pixel.
RoiMask full_roi(std::size_t width, std::size_t height);

/// sqrt(sum_{i in ROI} (a_i - b_i)^2 / n_roi)
double rmse(const Image& a, const Image& b, const RoiMask& roi);

/// 20 log10(peak / rmse) with peak = max of the reference `a` inside the ROI.
/// Returns +infinity when the images agree on the ROI.
double psnr(const Image& a, const Image& b, const RoiMask& roi);
double psnr_from_rmse(double peak, double rmse_value);

struct SsimOptions {
  std::size_t window = 8;
  double k1 = 0.01;
  double k2 = 0.03;
  /// <= 0 selects max - min of the reference inside the ROI.
  double dynamic_range = 0.0;
};

/// Mean local SSIM over full windows whose anchor pixel lies in the ROI. The
/// anchor of a window with top-left corner (r, c) is (r + w/2 - 1, c + w/2 - 1)
/// for even w and its centre for odd w. `a` is the reference.
double ssim(const Image& a, const Image& b, const RoiMask& roi, const SsimOptions& opts = {});

struct QualityReport {
  double rmse;
  double psnr;
  double ssim;
};

QualityReport evaluate(const Image& reconstruction, const Image& reference, const RoiMask& roi,
                       const SsimOptions& opts = {});

}  // namespace mrst::metrics
