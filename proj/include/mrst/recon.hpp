#pragma once

// PWLS reconstruction with an MRST regularizer:
//
//   min_{x >= 0} 1/2 ||y - A x||_W^2 + beta * R(x),
//   R(x) = min_Z sum_l ||W_l R_l - Z_l||_F^2 + gamma_l^2 ||Z_l||_0,
//
// with R_0 the patches of x. Solved by alternating a relaxed OS-LALM image
// update (codes fixed) with exact layer-by-layer sparse coding (x fixed).

#include <cstddef>
#include <functional>
#include <vector>

#include "mrst/ctsim.hpp"
#include "mrst/imaging.hpp"
#include "mrst/metrics.hpp"
#include "mrst/mrst.hpp"

namespace mrst::recon {

struct ReconConfig {
  double beta = 1.0;
  std::vector<double> gammas;  // one per layer
  std::size_t outer_iters = 1;
  std::size_t inner_iters = 2;
  std::size_t subsets = 4;
  double alpha = 1.999;
  double rho_min = 1e-3;

  void validate(std::size_t layers, std::size_t n_angles) const;
};

/// Relaxed OS-LALM step size: 1 at r = 0, then
/// pi / (alpha (r + 1)) * sqrt(1 - (pi / (2 alpha (r + 1)))^2), clamped to [rho_min, 1].
double rho_schedule(std::size_t r, double alpha, double rho_min);

/// Angle k goes to subset k mod M; subsets are returned in bit-reversed visit order.
std::vector<std::vector<std::size_t>> ordered_subsets(std::size_t n_angles, std::size_t subsets);

/// Measurement side of the problem: the HU-scaled system matrix, the data and
/// weights, D_A and the ordered subsets.
class PwlsProblem {
 public:
  PwlsProblem(const ct::SinogramSet& sino, std::size_t width, std::size_t height,
              double pixel_size, std::size_t subsets);

  const ct::SinogramSet& sinogram() const noexcept { return sino_; }
  const ct::Projector& projector() const noexcept { return projector_; }
  const Image& majorizer() const noexcept { return majorizer_; }
  const std::vector<std::vector<std::size_t>>& subsets() const noexcept { return subsets_; }
  std::size_t width() const noexcept { return projector_.width(); }
  std::size_t height() const noexcept { return projector_.height(); }

  /// 1/2 sum_i w_i (y_i - [A x]_i)^2
  double data_term(const Image& x) const;

  /// M A_m^T W_m (A_m x - y_m) for the subset at visit position m.
  std::vector<double> subset_gradient(const Image& x, std::size_t m) const;

 private:
  ct::SinogramSet sino_;
  ct::Projector projector_;
  Image majorizer_;
  std::vector<std::vector<std::size_t>> subsets_;
};

/// Gradient of beta * R2(x) for fixed codes, evaluated from patches:
///   2 beta sum_j P_j^T (L P_j x - sum_k (B_0^k)_j).
Image grad_r2(const Image& x, const MrstModel& model, const SparseCodeStack& codes, double beta,
              const PatchConfig& patch);

/// Exact Hessian diagonal of beta * R2: 2 L beta * overlap counts.
Image hessian_r2_diag(double beta, const PatchConfig& patch, std::size_t width,
                      std::size_t height, std::size_t layers);

/// grad_r2 in affine form 2 beta (L * counts .* x - offset), with the offset
/// image computed once from the codes.
class RegularizerGradient {
 public:
  RegularizerGradient(double beta, std::size_t layers, Image counts, Image offset);

  static RegularizerGradient from_codes(const MrstModel& model, const SparseCodeStack& codes,
                                        double beta, const PatchConfig& patch,
                                        std::size_t width, std::size_t height);

  void apply(const Image& x, std::vector<double>& out) const;

 private:
  double beta_;
  double layers_;
  Image counts_;
  Image offset_;
};

/// Exact minimizer over codes[l] with R_0 = patches of x and threshold gamma.
PatchMatrix sparse_code_recon(const Image& x, const MrstModel& model,
                              const SparseCodeStack& codes, std::span<const double> gammas,
                              const PatchConfig& patch, std::size_t l);

/// Sparse-codes every layer in order, refreshing residuals between layers.
void sparse_code_all(const Image& x, const MrstModel& model, SparseCodeStack& codes,
                     std::span<const double> gammas, const PatchConfig& patch);

/// 1/2 ||y - A x||_W^2 + beta * sum_l (||W_l R_l - Z_l||^2 + gamma_l^2 nnz(Z_l)).
double pwls_objective(const Image& x, const SparseCodeStack& codes, const PwlsProblem& problem,
                      const MrstModel& model, const ReconConfig& cfg, const PatchConfig& patch);

struct OsLalmState {
  Image x;
  std::vector<double> s;
  std::vector<double> g;
  std::vector<double> h;
  std::vector<double> zeta;
  double rho = 1.0;
  std::size_t step = 0;  // sub-iteration counter r
};

/// Initialization of one image-update phase: rho = 1, g = zeta from the last
/// subset in visit order, h = D_A x - zeta.
OsLalmState start_image_update(const Image& x, const PwlsProblem& problem);

/// Runs cfg.inner_iters passes over all subsets of the relaxed OS-LALM
/// recursion. Throws NumericError on a non-finite iterate.
void pwls_image_update(OsLalmState& state, const PwlsProblem& problem,
                       const RegularizerGradient& gradient, const Image& hessian_diag,
                       const ReconConfig& cfg);

struct TraceEntry {
  std::size_t iteration;
  double objective_after_image;
  double objective;  // after sparse coding
  double rmse;       // NaN without a reference
  double wall_seconds;
};

struct ReconOptions {
  const Image* reference = nullptr;
  const metrics::RoiMask* roi = nullptr;
  std::function<void(const TraceEntry&)> on_iteration;
};

struct ReconResult {
  Image image;
  SparseCodeStack codes;
  std::vector<TraceEntry> trace;
};

/// Outer loop: T_O rounds of (image update, sparse coding), starting from
/// `init` and all-zero codes.
ReconResult reconstruct(const ct::SinogramSet& sino, const MrstModel& model,
                        const PatchConfig& patch, const ReconConfig& cfg, const Image& init,
                        const ReconOptions& opts = {});

}  // namespace mrst::recon
