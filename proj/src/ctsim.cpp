#include "mrst/ctsim.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <string>

#include "mrst/error.hpp"
#include "mrst/kernels.hpp"
#include "mrst/parallel.hpp"

namespace mrst::ct {

double Geometry::angle(std::size_t k) const noexcept {
  return std::numbers::pi * static_cast<double>(k) / static_cast<double>(n_angles);
}

double Geometry::detector_offset(std::size_t d) const noexcept {
  return (static_cast<double>(d) - 0.5 * static_cast<double>(n_detectors - 1)) * detector_spacing;
}

void Geometry::validate() const {
  if (n_angles < 1 || n_detectors < 1) {
    throw ConfigError("geometry needs at least one angle and one detector");
  }
  if (!(detector_spacing > 0.0) || !std::isfinite(detector_spacing)) {
    throw ConfigError("detector spacing must be positive");
  }
}

Geometry Geometry::covering(std::size_t width, std::size_t height, double pixel_size,
                            std::size_t n_angles) {
  const double diag = std::hypot(static_cast<double>(width), static_cast<double>(height));
  Geometry g;
  g.n_angles = n_angles;
  g.n_detectors = static_cast<std::size_t>(std::ceil(diag)) + 2;
  g.detector_spacing = pixel_size;
  return g;
}

void SinogramSet::validate() const {
  geometry.validate();
  const std::size_t n = geometry.rays();
  if (y.size() != n || weights.size() != n) {
    throw ConfigError("sinogram holds " + std::to_string(y.size()) + " values and " +
                      std::to_string(weights.size()) + " weights, geometry needs " +
                      std::to_string(n));
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(y[i]) || !std::isfinite(weights[i]) || weights[i] < 0.0) {
      throw InputError("sinogram ray " + std::to_string(i) +
                       " has a non-finite value or negative weight");
    }
  }
}

void NoiseConfig::validate() const {
  if (!noiseless && !(incident_photons > 0.0 && std::isfinite(incident_photons))) {
    throw ConfigError("incident photon count must be positive");
  }
}

PhantomKind parse_phantom_kind(std::string_view name) {
  if (name == "shepp_logan") return PhantomKind::shepp_logan;
  if (name == "disk") return PhantomKind::disk;
  if (name == "uniform") return PhantomKind::uniform;
  throw ConfigError("unknown phantom kind '" + std::string(name) +
                    "' (expected shepp_logan, disk or uniform)");
}

std::string_view to_string(PhantomKind kind) {
  switch (kind) {
    case PhantomKind::shepp_logan: return "shepp_logan";
    case PhantomKind::disk: return "disk";
    case PhantomKind::uniform: return "uniform";
  }
  return "unknown";
}

namespace {

struct Ellipse {
  double intensity, a, b, x0, y0, phi_deg;
};

// Kak & Slaney head phantom.
constexpr std::array<Ellipse, 10> kSheppLogan{{
    {2.00, 0.6900, 0.9200, 0.00, 0.0000, 0.0},
    {-0.98, 0.6624, 0.8740, 0.00, -0.0184, 0.0},
    {-0.02, 0.1100, 0.3100, 0.22, 0.0000, -18.0},
    {-0.02, 0.1600, 0.4100, -0.22, 0.0000, 18.0},
    {0.01, 0.2100, 0.2500, 0.00, 0.3500, 0.0},
    {0.01, 0.0460, 0.0460, 0.00, 0.1000, 0.0},
    {0.01, 0.0460, 0.0460, 0.00, -0.1000, 0.0},
    {0.01, 0.0460, 0.0230, -0.08, -0.6050, 0.0},
    {0.01, 0.0230, 0.0230, 0.00, -0.6060, 0.0},
    {0.01, 0.0230, 0.0460, 0.06, -0.6050, 0.0},
}};

}  // namespace

double shepp_logan_value(double x, double y) {
  double v = 0.0;
  for (const auto& e : kSheppLogan) {
    const double phi = e.phi_deg * std::numbers::pi / 180.0;
    const double dx = x - e.x0;
    const double dy = y - e.y0;
    const double u = dx * std::cos(phi) + dy * std::sin(phi);
    const double w = -dx * std::sin(phi) + dy * std::cos(phi);
    if ((u * u) / (e.a * e.a) + (w * w) / (e.b * e.b) <= 1.0) v += e.intensity;
  }
  return v * 1000.0;
}

Image make_phantom(PhantomKind kind, std::size_t width, std::size_t height,
                   const PhantomOptions& opts) {
  if (width == 0 || height == 0) throw ConfigError("phantom dimensions must be positive");
  Image img(width, height, opts.pixel_size);
  const double cx = 0.5 * static_cast<double>(width - 1);
  const double cy = 0.5 * static_cast<double>(height - 1);
  switch (kind) {
    case PhantomKind::uniform:
      std::fill(img.values().begin(), img.values().end(), opts.value);
      break;
    case PhantomKind::disk: {
      const double radius =
          opts.disk_radius_fraction * 0.5 * static_cast<double>(std::min(width, height));
      for (std::size_t r = 0; r < height; ++r)
        for (std::size_t c = 0; c < width; ++c) {
          const double dx = static_cast<double>(c) - cx;
          const double dy = static_cast<double>(r) - cy;
          img(r, c) = dx * dx + dy * dy <= radius * radius ? opts.value : 0.0;
        }
      break;
    }
    case PhantomKind::shepp_logan:
      for (std::size_t r = 0; r < height; ++r)
        for (std::size_t c = 0; c < width; ++c) {
          const double x = (static_cast<double>(c) - cx) / (0.5 * static_cast<double>(width));
          const double y = (cy - static_cast<double>(r)) / (0.5 * static_cast<double>(height));
          img(r, c) = shepp_logan_value(x, y);
        }
      break;
  }
  return img;
}

Projector::Projector(const Geometry& geometry, std::size_t width, std::size_t height,
                     double pixel_size, double scale)
    : geometry_(geometry), width_(width), height_(height), pixel_size_(pixel_size), scale_(scale) {
  geometry_.validate();
  if (width == 0 || height == 0 || !(pixel_size > 0.0)) {
    throw ConfigError("projector needs a non-empty image grid with positive pixel size");
  }
  if (width * height > std::numeric_limits<std::uint32_t>::max()) {
    throw ConfigError("image too large for 32-bit pixel indices");
  }
  const double half_w = 0.5 * static_cast<double>(width) * pixel_size;
  const double half_h = 0.5 * static_cast<double>(height) * pixel_size;
  constexpr double kParallel = 1e-12;
  const double min_len = 1e-12 * pixel_size;

  row_ptr_.reserve(geometry_.rays() + 1);
  row_ptr_.push_back(0);
  std::vector<double> params;
  params.reserve(2 * (width + height + 2));

  for (std::size_t a = 0; a < geometry_.n_angles; ++a) {
    const double theta = geometry_.angle(a);
    const double c = std::cos(theta);
    const double s = std::sin(theta);
    // Ray: {p : p . (c, s) = t}, traversed along u = (-s, c).
    const double ux = std::abs(s) < kParallel ? 0.0 : -s;
    const double uy = std::abs(c) < kParallel ? 0.0 : c;
    for (std::size_t d = 0; d < geometry_.n_detectors; ++d) {
      const double t = geometry_.detector_offset(d);
      const double ox = t * c;
      const double oy = t * s;

      double lo = -std::numeric_limits<double>::infinity();
      double hi = std::numeric_limits<double>::infinity();
      bool hits = true;
      auto clip = [&](double o, double u, double half) {
        if (u == 0.0) {
          if (std::abs(o) >= half) hits = false;
          return;
        }
        double s0 = (-half - o) / u;
        double s1 = (half - o) / u;
        if (s0 > s1) std::swap(s0, s1);
        lo = std::max(lo, s0);
        hi = std::min(hi, s1);
      };
      clip(ox, ux, half_w);
      clip(oy, uy, half_h);

      if (hits && hi - lo > min_len) {
        params.clear();
        params.push_back(lo);
        params.push_back(hi);
        if (ux != 0.0) {
          for (std::size_t k = 0; k <= width; ++k) {
            const double edge = (static_cast<double>(k) - 0.5 * static_cast<double>(width)) * pixel_size;
            const double sp = (edge - ox) / ux;
            if (sp > lo && sp < hi) params.push_back(sp);
          }
        }
        if (uy != 0.0) {
          for (std::size_t k = 0; k <= height; ++k) {
            const double edge = (0.5 * static_cast<double>(height) - static_cast<double>(k)) * pixel_size;
            const double sp = (edge - oy) / uy;
            if (sp > lo && sp < hi) params.push_back(sp);
          }
        }
        std::sort(params.begin(), params.end());
        const std::size_t row_start = pixels_.size();
        for (std::size_t k = 0; k + 1 < params.size(); ++k) {
          const double len = params[k + 1] - params[k];
          if (len <= min_len) continue;
          const double mid = 0.5 * (params[k] + params[k + 1]);
          const double mx = ox + mid * ux;
          const double my = oy + mid * uy;
          auto col = static_cast<long>(std::floor(mx / pixel_size + 0.5 * static_cast<double>(width)));
          auto row = static_cast<long>(std::floor(0.5 * static_cast<double>(height) - my / pixel_size));
          col = std::clamp<long>(col, 0, static_cast<long>(width) - 1);
          row = std::clamp<long>(row, 0, static_cast<long>(height) - 1);
          const auto pix = static_cast<std::uint32_t>(row * static_cast<long>(width) + col);
          if (pixels_.size() > row_start && pixels_.back() == pix) {
            values_.back() += len * scale_;
          } else {
            pixels_.push_back(pix);
            values_.push_back(len * scale_);
          }
        }
      }
      row_ptr_.push_back(pixels_.size());
    }
  }
}

void Projector::check_image(std::size_t n) const {
  if (n != width_ * height_) {
    throw ConfigError("image has " + std::to_string(n) + " pixels, projector expects " +
                      std::to_string(width_ * height_));
  }
}

double Projector::ray_sum(std::size_t ray, std::span<const double> x) const {
  const auto v = row_values(ray);
  return simd::active().sparse_dot(v.data(), row_pixels(ray).data(), v.size(), x.data());
}

void Projector::ray_backproject(std::size_t ray, double alpha, std::span<double> x) const {
  const auto v = row_values(ray);
  simd::active().sparse_axpy(v.data(), row_pixels(ray).data(), v.size(), alpha, x.data());
}

std::vector<double> Projector::forward(const Image& img) const {
  check_image(img.size());
  std::vector<double> out(geometry_.rays());
  parallel_for(out.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) out[i] = ray_sum(i, img.data());
  });
  return out;
}

Image Projector::back(std::span<const double> sino) const {
  if (sino.size() != geometry_.rays()) {
    throw ConfigError("sinogram has " + std::to_string(sino.size()) + " rays, geometry needs " +
                      std::to_string(geometry_.rays()));
  }
  Image out(width_, height_, pixel_size_);
  for (std::size_t i = 0; i < sino.size(); ++i) {
    if (sino[i] != 0.0) ray_backproject(i, sino[i], out.data());
  }
  return out;
}

std::vector<double> forward_project(const Image& img, const Geometry& geo) {
  return Projector(geo, img.width(), img.height(), img.pixel_size()).forward(img);
}

Image back_project(std::span<const double> sino, const Geometry& geo, std::size_t width,
                   std::size_t height, double pixel_size) {
  return Projector(geo, width, height, pixel_size).back(sino);
}

SinogramSet simulate_lowdose(const Image& img, const Geometry& geo, const NoiseConfig& noise) {
  noise.validate();
  img.check_finite("simulate input");
  const Projector proj(geo, img.width(), img.height(), img.pixel_size(), kHuToAttenuation);
  SinogramSet out;
  out.geometry = geo;
  out.y = proj.forward(img);
  if (noise.noiseless) {
    out.weights.assign(out.y.size(), 1.0);
    return out;
  }
  out.weights.resize(out.y.size());
  std::mt19937_64 rng(noise.seed);
  const double i0 = noise.incident_photons;
  for (std::size_t i = 0; i < out.y.size(); ++i) {
    std::poisson_distribution<long long> draw(i0 * std::exp(-out.y[i]));
    const double counts = static_cast<double>(draw(rng));
    out.y[i] = std::log(i0 / std::max(counts, 1.0));
    out.weights[i] = counts;
  }
  return out;
}

Image fbp(const SinogramSet& sino, std::size_t width, std::size_t height, double pixel_size) {
  const Geometry& geo = sino.geometry;
  geo.validate();
  if (sino.y.size() != geo.rays()) throw ConfigError("sinogram length does not match geometry");
  const std::size_t nd = geo.n_detectors;
  const double tau = geo.detector_spacing;

  // Ram-Lak kernel sampled at the detector pitch.
  std::vector<double> h(2 * nd - 1, 0.0);
  for (std::size_t k = 0; k < h.size(); ++k) {
    const long n = static_cast<long>(k) - static_cast<long>(nd - 1);
    if (n == 0) {
      h[k] = 1.0 / (4.0 * tau * tau);
    } else if (n % 2 != 0) {
      h[k] = -1.0 / (std::numbers::pi * std::numbers::pi * static_cast<double>(n * n) * tau * tau);
    }
  }
  std::vector<double> filtered(geo.rays(), 0.0);
  for (std::size_t a = 0; a < geo.n_angles; ++a) {
    const double* p = sino.y.data() + a * nd;
    double* q = filtered.data() + a * nd;
    for (std::size_t k = 0; k < nd; ++k) {
      double acc = 0.0;
      for (std::size_t m = 0; m < nd; ++m) acc += p[m] * h[k + (nd - 1) - m];
      q[k] = tau * acc;
    }
  }

  Image out(width, height, pixel_size);
  const double cx = 0.5 * static_cast<double>(width - 1);
  const double cy = 0.5 * static_cast<double>(height - 1);
  const double centre = 0.5 * static_cast<double>(nd - 1);
  std::vector<double> cosv(geo.n_angles), sinv(geo.n_angles);
  for (std::size_t a = 0; a < geo.n_angles; ++a) {
    cosv[a] = std::cos(geo.angle(a));
    sinv[a] = std::sin(geo.angle(a));
  }
  const double norm = std::numbers::pi / static_cast<double>(geo.n_angles) / kHuToAttenuation;
  parallel_for(height, [&](std::size_t b, std::size_t e) {
    for (std::size_t r = b; r < e; ++r) {
      const double y = (cy - static_cast<double>(r)) * pixel_size;
      for (std::size_t c = 0; c < width; ++c) {
        const double x = (static_cast<double>(c) - cx) * pixel_size;
        double acc = 0.0;
        for (std::size_t a = 0; a < geo.n_angles; ++a) {
          const double u = (x * cosv[a] + y * sinv[a]) / tau + centre;
          const double fl = std::floor(u);
          const auto k = static_cast<long>(fl);
          if (k < 0 || k + 1 >= static_cast<long>(nd)) {
            if (k == static_cast<long>(nd) - 1 && u == fl) acc += filtered[a * nd + nd - 1];
            continue;
          }
          const double f = u - fl;
          const double* q = filtered.data() + a * nd;
          acc += (1.0 - f) * q[k] + f * q[k + 1];
        }
        out(r, c) = acc * norm;
      }
    }
  }, 4);
  return out;
}

Image majorizer_diag(const Projector& projector, std::span<const double> weights) {
  if (weights.size() != projector.geometry().rays()) {
    throw ConfigError("weight vector does not match the projector geometry");
  }
  const Image ones(projector.width(), projector.height(), projector.pixel_size(), 1.0);
  std::vector<double> row = projector.forward(ones);
  for (std::size_t i = 0; i < row.size(); ++i) row[i] *= weights[i];
  Image d = projector.back(row);
  double peak = 0.0;
  for (double v : d.values()) peak = std::max(peak, v);
  const double floor_value = peak > 0.0 ? 1e-12 * peak : 1e-12;
  for (double& v : d.values()) v = std::max(v, floor_value);
  return d;
}

}  // namespace mrst::ct
