#include "mrst/single_layer.hpp"

#include <cmath>
#include <string>

#include "mrst/error.hpp"
#include "mrst/kernels.hpp"
#include "mrst/parallel.hpp"
#include "recon_loop.hpp"

namespace mrst::st {

namespace {

PatchMatrix threshold_codes(const Matrix& transform, const PatchMatrix& patches, double eta) {
  PatchMatrix z = apply_transform(transform, patches);
  const auto& k = simd::active();
  parallel_for(z.size(), [&](std::size_t b, std::size_t e) {
    k.hard_threshold(z.raw() + b, z.raw() + b, e - b, eta);
  }, 1 << 14);
  return z;
}

Matrix rotation_update(const PatchMatrix& patches, const PatchMatrix& codes) {
  const std::size_t p = patches.rows();
  Matrix g = Matrix::Zero(p, p);
  simd::active().accumulate_outer(patches.raw(), codes.raw(), p, patches.cols(), g.data());
  return procrustes_rotation(g);
}

}  // namespace

double objective(const Matrix& transform, const PatchMatrix& patches, const PatchMatrix& codes,
                 double eta) {
  const auto& k = simd::active();
  const PatchMatrix t = apply_transform(transform, patches);
  double total = 0.0;
  total += k.squared_distance(t.raw(), codes.raw(), t.size());
  total += eta * eta * static_cast<double>(k.count_nonzero(codes.raw(), codes.size()));
  return total;
}

LearnResult learn(const PatchMatrix& training, std::size_t iterations, double eta) {
  if (iterations < 1) throw ConfigError("iterations must be >= 1");
  for (double v : training.values()) {
    if (!std::isfinite(v)) throw InputError("training data contains non-finite values");
  }
  LearnResult out;
  out.transform = init_model(1, training.rows()).transforms[0];
  out.codes = PatchMatrix(training.rows(), training.cols());
  out.initial_objective = objective(out.transform, training, out.codes, eta);
  for (std::size_t it = 0; it < iterations; ++it) {
    out.codes = threshold_codes(out.transform, training, eta);
    out.transform = rotation_update(training, out.codes);
    out.objective_trace.push_back(objective(out.transform, training, out.codes, eta));
  }
  return out;
}

namespace {

class SingleLayerRegularizer {
 public:
  SingleLayerRegularizer(const Matrix& transform, double beta, double gamma,
                         const PatchConfig& patch, std::size_t width, std::size_t height)
      : transform_(transform),
        adjoint_(transform.transpose()),
        beta_(beta),
        gamma_(gamma),
        patch_(patch),
        width_(width),
        height_(height) {}

  std::size_t layers() const { return 1; }

  PatchMatrix zero_codes(std::size_t n) const { return PatchMatrix(transform_.rows(), n); }

  recon::RegularizerGradient gradient(const PatchMatrix& codes) const {
    return recon::RegularizerGradient(
        beta_, 1, overlap_counts(patch_, width_, height_),
        accumulate_patches(apply_transform(adjoint_, codes), patch_, width_, height_));
  }

  void sparse_code(const Image& x, PatchMatrix& codes) const {
    codes = threshold_codes(transform_, extract_patches(x, patch_), gamma_);
  }

  double penalty(const Image& x, const PatchMatrix& codes) const {
    return objective(transform_, extract_patches(x, patch_), codes, gamma_);
  }

 private:
  const Matrix& transform_;
  Matrix adjoint_;
  double beta_;
  double gamma_;
  const PatchConfig& patch_;
  std::size_t width_;
  std::size_t height_;
};

// The shared loop stores codes in a SparseCodeStack; adapt the single matrix.
class StackAdapter {
 public:
  explicit StackAdapter(const SingleLayerRegularizer& inner) : inner_(inner) {}
  std::size_t layers() const { return 1; }
  SparseCodeStack zero_codes(std::size_t n) const { return {inner_.zero_codes(n)}; }
  recon::RegularizerGradient gradient(const SparseCodeStack& c) const {
    return inner_.gradient(c[0]);
  }
  void sparse_code(const Image& x, SparseCodeStack& c) const { inner_.sparse_code(x, c[0]); }
  double penalty(const Image& x, const SparseCodeStack& c) const {
    return inner_.penalty(x, c[0]);
  }

 private:
  const SingleLayerRegularizer& inner_;
};

}  // namespace

recon::ReconResult reconstruct(const ct::SinogramSet& sino, const Matrix& transform,
                               const PatchConfig& patch, const recon::ReconConfig& cfg,
                               const Image& init, const recon::ReconOptions& opts) {
  cfg.validate(1, sino.geometry.n_angles);
  if (static_cast<std::size_t>(transform.rows()) != patch.patch_size() ||
      transform.rows() != transform.cols()) {
    throw ConfigError("transform does not match patch size " +
                      std::to_string(patch.patch_size()));
  }
  const SingleLayerRegularizer reg(transform, cfg.beta, cfg.gammas[0], patch, init.width(),
                                   init.height());
  return recon::detail::run_outer_loop(sino, StackAdapter(reg), patch, cfg, init, opts);
}

}  // namespace mrst::st
