#include "mrst/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "mrst/error.hpp"

namespace mrst::metrics {

namespace {

void check_pair(const Image& a, const Image& b, const RoiMask& roi) {
  if (!a.same_shape(b)) throw ConfigError("metric inputs have different dimensions");
  if (roi.width != a.width() || roi.height != a.height()) {
    throw ConfigError("ROI mask does not match the image dimensions");
  }
  if (roi.n_roi == 0) throw ConfigError("ROI is empty");
}

}  // namespace

RoiMask circular_roi(std::size_t width, std::size_t height, double radius_fraction) {
  if (!(radius_fraction > 0.0 && radius_fraction <= 1.0)) {
    throw ConfigError("ROI radius fraction must lie in (0, 1], got " +
                      std::to_string(radius_fraction));
  }
  RoiMask m;
  m.width = width;
  m.height = height;
  m.inside.assign(width * height, 0);
  const double radius = radius_fraction * 0.5 * static_cast<double>(std::min(width, height));
  const double cx = 0.5 * static_cast<double>(width);
  const double cy = 0.5 * static_cast<double>(height);
  for (std::size_t r = 0; r < height; ++r) {
    for (std::size_t c = 0; c < width; ++c) {
      const double dx = static_cast<double>(c) + 0.5 - cx;
      const double dy = static_cast<double>(r) + 0.5 - cy;
      if (dx * dx + dy * dy <= radius * radius) {
        m.inside[r * width + c] = 1;
        ++m.n_roi;
      }
    }
  }
  if (m.n_roi == 0) throw ConfigError("ROI contains no pixel centre");
  return m;
}

RoiMask full_roi(std::size_t width, std::size_t height) {
  RoiMask m;
  m.width = width;
  m.height = height;
  m.inside.assign(width * height, 1);
  m.n_roi = width * height;
  return m;
}

double rmse(const Image& a, const Image& b, const RoiMask& roi) {
  check_pair(a, b, roi);
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!roi.inside[i]) continue;
    const double d = a.values()[i] - b.values()[i];
    s += d * d;
  }
  return std::sqrt(s / static_cast<double>(roi.n_roi));
}

double psnr_from_rmse(double peak, double rmse_value) {
  if (rmse_value == 0.0) return std::numeric_limits<double>::infinity();
  return 20.0 * std::log10(peak / rmse_value);
}

double psnr(const Image& a, const Image& b, const RoiMask& roi) {
  check_pair(a, b, roi);
  double peak = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (roi.inside[i]) peak = std::max(peak, a.values()[i]);
  }
  return psnr_from_rmse(peak, rmse(a, b, roi));
}

double ssim(const Image& a, const Image& b, const RoiMask& roi, const SsimOptions& opts) {
  check_pair(a, b, roi);
  const std::size_t w = opts.window;
  if (w < 2 || w > a.width() || w > a.height()) {
    throw ConfigError("SSIM window does not fit the image");
  }
  double range = opts.dynamic_range;
  if (range <= 0.0) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (!roi.inside[i]) continue;
      lo = std::min(lo, a.values()[i]);
      hi = std::max(hi, a.values()[i]);
    }
    range = hi - lo;
    if (range <= 0.0) range = 1.0;
  }
  const double c1 = (opts.k1 * range) * (opts.k1 * range);
  const double c2 = (opts.k2 * range) * (opts.k2 * range);
  const std::size_t anchor = w % 2 == 0 ? w / 2 - 1 : w / 2;
  const double n = static_cast<double>(w * w);

  double total = 0.0;
  std::size_t windows = 0;
  for (std::size_t r0 = 0; r0 + w <= a.height(); ++r0) {
    for (std::size_t c0 = 0; c0 + w <= a.width(); ++c0) {
      if (!roi.contains(r0 + anchor, c0 + anchor)) continue;
      double ma = 0.0, mb = 0.0;
      for (std::size_t r = r0; r < r0 + w; ++r)
        for (std::size_t c = c0; c < c0 + w; ++c) {
          ma += a(r, c);
          mb += b(r, c);
        }
      ma /= n;
      mb /= n;
      double va = 0.0, vb = 0.0, cab = 0.0;
      for (std::size_t r = r0; r < r0 + w; ++r)
        for (std::size_t c = c0; c < c0 + w; ++c) {
          const double da = a(r, c) - ma;
          const double db = b(r, c) - mb;
          va += da * da;
          vb += db * db;
          cab += da * db;
        }
      va /= n;
      vb /= n;
      cab /= n;
      const double num = (2.0 * ma * mb + c1) * (2.0 * cab + c2);
      const double den = (ma * ma + mb * mb + c1) * (va + vb + c2);
      total += num / den;
      ++windows;
    }
  }
  if (windows == 0) throw ConfigError("no SSIM window is anchored inside the ROI");
  return total / static_cast<double>(windows);
}

QualityReport evaluate(const Image& reconstruction, const Image& reference, const RoiMask& roi,
                       const SsimOptions& opts) {
  return {rmse(reference, reconstruction, roi), psnr(reference, reconstruction, roi),
          ssim(reference, reconstruction, roi, opts)};
}

}  // namespace mrst::metrics
