#pragma once

// 2D parallel-beam CT: phantoms, an exact-intersection (Siddon) system
// matrix with its matched transpose, Poisson low-dose simulation, ramp-filter
// FBP and the diagonal majorizer of A^T W A.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "mrst/imaging.hpp"

namespace mrst::ct {

/// Linear attenuation of water in 1/mm.
inline constexpr double kWaterAttenuation = 0.02;
/// Multiplier taking modified HU (water = 1000) to attenuation in 1/mm.
inline constexpr double kHuToAttenuation = kWaterAttenuation / 1000.0;

/// Angles are uniform over [0, pi); detectors are centred on the rotation axis.
struct Geometry {
  std::size_t n_angles = 0;
  std::size_t n_detectors = 0;
  double detector_spacing = 1.0;  // mm

  std::size_t rays() const noexcept { return n_angles * n_detectors; }
  double angle(std::size_t k) const noexcept;
  /// Signed detector offset from the centre, mm.
  double detector_offset(std::size_t d) const noexcept;
  void validate() const;

  /// Detector row wide enough to cover the image diagonal.
  static Geometry covering(std::size_t width, std::size_t height, double pixel_size,
                           std::size_t n_angles);

  friend bool operator==(const Geometry&, const Geometry&) = default;
};

/// Post-log measurements with diagonal statistical weights. Ray index is
/// angle * n_detectors + detector.
struct SinogramSet {
  std::vector<double> y;
  std::vector<double> weights;
  Geometry geometry;

  void validate() const;

  friend bool operator==(const SinogramSet&, const SinogramSet&) = default;
};

struct NoiseConfig {
  double incident_photons = 1e4;
  std::uint64_t seed = 0;
  bool noiseless = false;

  void validate() const;
};

enum class PhantomKind { shepp_logan, disk, uniform };

PhantomKind parse_phantom_kind(std::string_view name);
std::string_view to_string(PhantomKind kind);

struct PhantomOptions {
  double pixel_size = 1.0;
  double value = 1000.0;                // disk and uniform
  double disk_radius_fraction = 0.5;    // of min(width, height) / 2
};

/// Shepp-Logan head phantom (original intensities, times 1000) at a point in
/// normalized coordinates, x to the right and y up, both in [-1, 1].
double shepp_logan_value(double x, double y);

/// Point-sampled at pixel centres.
Image make_phantom(PhantomKind kind, std::size_t width, std::size_t height,
                   const PhantomOptions& opts = {});

/// Sparse system matrix stored by ray, with exact intersection lengths of
/// each ray with the pixel grid, multiplied by `scale`. Forward and back
/// projection read the same entries, so they are an exact adjoint pair.
class Projector {
 public:
  Projector(const Geometry& geometry, std::size_t width, std::size_t height, double pixel_size,
            double scale = 1.0);

  const Geometry& geometry() const noexcept { return geometry_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t height() const noexcept { return height_; }
  double pixel_size() const noexcept { return pixel_size_; }
  double scale() const noexcept { return scale_; }
  std::size_t nnz() const noexcept { return values_.size(); }

  std::span<const double> row_values(std::size_t ray) const noexcept {
    return {values_.data() + row_ptr_[ray], row_ptr_[ray + 1] - row_ptr_[ray]};
  }
  std::span<const std::uint32_t> row_pixels(std::size_t ray) const noexcept {
    return {pixels_.data() + row_ptr_[ray], row_ptr_[ray + 1] - row_ptr_[ray]};
  }

  /// sum_j A_ij x_j
  double ray_sum(std::size_t ray, std::span<const double> x) const;
  /// x += alpha * A_i^T
  void ray_backproject(std::size_t ray, double alpha, std::span<double> x) const;

  std::vector<double> forward(const Image& img) const;
  Image back(std::span<const double> sino) const;

 private:
  void check_image(std::size_t n) const;

  Geometry geometry_;
  std::size_t width_;
  std::size_t height_;
  double pixel_size_;
  double scale_;
  std::vector<std::size_t> row_ptr_;
  std::vector<std::uint32_t> pixels_;
  std::vector<double> values_;
};

/// Line integrals of pixel values (intersection length times value).
std::vector<double> forward_project(const Image& img, const Geometry& geo);
/// Exact adjoint of forward_project.
Image back_project(std::span<const double> sino, const Geometry& geo, std::size_t width,
                   std::size_t height, double pixel_size = 1.0);

/// Poisson counts N_i ~ Poisson(I0 exp(-[A mu]_i)) with mu converted from
/// modified HU; y_i = ln(I0 / max(N_i, 1)) and w_i = N_i. In noiseless mode
/// y = A mu and w = 1.
SinogramSet simulate_lowdose(const Image& img, const Geometry& geo, const NoiseConfig& noise);

/// Ram-Lak filtered backprojection; output in modified HU.
Image fbp(const SinogramSet& sino, std::size_t width, std::size_t height,
          double pixel_size = 1.0);

/// diag(A^T W A 1), floored at 1e-12 times its maximum.
Image majorizer_diag(const Projector& projector, std::span<const double> weights);

}  // namespace mrst::ct
