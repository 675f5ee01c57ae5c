#include "mrst/recon.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "mrst/error.hpp"
#include "mrst/kernels.hpp"
#include "mrst/parallel.hpp"
#include "recon_loop.hpp"

namespace mrst::recon {

void ReconConfig::validate(std::size_t layers, std::size_t n_angles) const {
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw ConfigError("recon.beta must be >= 0");
  if (gammas.size() != layers) {
    throw ConfigError("recon.gammas has " + std::to_string(gammas.size()) +
                      " entries, model has " + std::to_string(layers) + " layers");
  }
  for (double g : gammas) {
    if (!(g >= 0.0) || !std::isfinite(g)) throw ConfigError("recon.gammas must be >= 0");
  }
  if (outer_iters < 1 || inner_iters < 1) {
    throw ConfigError("recon.outer_iters and recon.inner_iters must be >= 1");
  }
  if (subsets < 1 || subsets > n_angles) {
    throw ConfigError("recon.subsets must lie in [1, n_angles]");
  }
  if (!(alpha > 1.0 && alpha < 2.0)) throw ConfigError("recon.alpha must lie in (1, 2)");
  if (!(rho_min > 0.0 && rho_min <= 1.0)) throw ConfigError("recon.rho_min must lie in (0, 1]");
}

double rho_schedule(std::size_t r, double alpha, double rho_min) {
  if (r == 0) return 1.0;
  const double k = alpha * static_cast<double>(r + 1);
  const double q = std::numbers::pi / (2.0 * k);
  const double rho = std::numbers::pi / k * std::sqrt(std::max(0.0, 1.0 - q * q));
  return std::clamp(rho, rho_min, 1.0);
}

std::vector<std::vector<std::size_t>> ordered_subsets(std::size_t n_angles, std::size_t subsets) {
  if (subsets < 1 || subsets > n_angles) {
    throw ConfigError("subset count must lie in [1, n_angles]");
  }
  std::size_t bits = 0;
  while ((std::size_t{1} << bits) < subsets) ++bits;
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < (std::size_t{1} << bits); ++i) {
    std::size_t rev = 0;
    for (std::size_t b = 0; b < bits; ++b) {
      if (i & (std::size_t{1} << b)) rev |= std::size_t{1} << (bits - 1 - b);
    }
    if (rev < subsets) order.push_back(rev);
  }
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t m : order) {
    std::vector<std::size_t> angles;
    for (std::size_t a = m; a < n_angles; a += subsets) angles.push_back(a);
    out.push_back(std::move(angles));
  }
  return out;
}

PwlsProblem::PwlsProblem(const ct::SinogramSet& sino, std::size_t width, std::size_t height,
                         double pixel_size, std::size_t subsets)
    : sino_(sino),
      projector_(sino.geometry, width, height, pixel_size, ct::kHuToAttenuation),
      majorizer_(ct::majorizer_diag(projector_, sino.weights)),
      subsets_(ordered_subsets(sino.geometry.n_angles, subsets)) {
  sino_.validate();
}

double PwlsProblem::data_term(const Image& x) const {
  const std::vector<double> ax = projector_.forward(x);
  double s = 0.0;
  for (std::size_t i = 0; i < ax.size(); ++i) {
    const double r = sino_.y[i] - ax[i];
    s += sino_.weights[i] * r * r;
  }
  return 0.5 * s;
}

std::vector<double> PwlsProblem::subset_gradient(const Image& x, std::size_t m) const {
  const std::size_t nd = sino_.geometry.n_detectors;
  const double scale = static_cast<double>(subsets_.size());
  std::vector<double> out(x.size(), 0.0);
  for (std::size_t a : subsets_.at(m)) {
    for (std::size_t d = 0; d < nd; ++d) {
      const std::size_t ray = a * nd + d;
      const double w = sino_.weights[ray];
      if (w == 0.0) continue;
      const double r = w * (projector_.ray_sum(ray, x.data()) - sino_.y[ray]);
      if (r != 0.0) projector_.ray_backproject(ray, scale * r, out);
    }
  }
  return out;
}

Image grad_r2(const Image& x, const MrstModel& model, const SparseCodeStack& codes, double beta,
              const PatchConfig& patch) {
  const PatchMatrix px = extract_patches(x, patch);
  const PatchMatrix tail = backprop_sum(model, codes, 0);
  PatchMatrix inner(px.rows(), px.cols());
  simd::active().lincomb(static_cast<double>(model.layers()), px.raw(), -1.0, tail.raw(),
                         inner.raw(), inner.size());
  Image g = accumulate_patches(inner, patch, x.width(), x.height(), x.pixel_size());
  for (double& v : g.values()) v *= 2.0 * beta;
  return g;
}

Image hessian_r2_diag(double beta, const PatchConfig& patch, std::size_t width,
                      std::size_t height, std::size_t layers) {
  Image d = overlap_counts(patch, width, height);
  const double f = 2.0 * static_cast<double>(layers) * beta;
  for (double& v : d.values()) v *= f;
  return d;
}

RegularizerGradient::RegularizerGradient(double beta, std::size_t layers, Image counts,
                                         Image offset)
    : beta_(beta),
      layers_(static_cast<double>(layers)),
      counts_(std::move(counts)),
      offset_(std::move(offset)) {}

RegularizerGradient RegularizerGradient::from_codes(const MrstModel& model,
                                                    const SparseCodeStack& codes, double beta,
                                                    const PatchConfig& patch, std::size_t width,
                                                    std::size_t height) {
  return RegularizerGradient(beta, model.layers(), overlap_counts(patch, width, height),
                             accumulate_patches(backprop_sum(model, codes, 0), patch, width,
                                                height));
}

void RegularizerGradient::apply(const Image& x, std::vector<double>& out) const {
  const auto& c = counts_.values();
  const auto& o = offset_.values();
  const auto& xv = x.values();
  out.resize(xv.size());
  const double f = 2.0 * beta_;
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = f * (layers_ * c[i] * xv[i] - o[i]);
}

PatchMatrix sparse_code_recon(const Image& x, const MrstModel& model,
                              const SparseCodeStack& codes, std::span<const double> gammas,
                              const PatchConfig& patch, std::size_t l) {
  const auto residuals = residual_stack(extract_patches(x, patch), model, codes);
  return sparse_code(model, codes, residuals, l, gammas[l]);
}

void sparse_code_all(const Image& x, const MrstModel& model, SparseCodeStack& codes,
                     std::span<const double> gammas, const PatchConfig& patch) {
  if (gammas.size() != model.layers()) throw ConfigError("one gamma per layer is required");
  auto residuals = residual_stack(extract_patches(x, patch), model, codes);
  for (std::size_t l = 0; l < model.layers(); ++l) {
    codes[l] = sparse_code(model, codes, residuals, l, gammas[l]);
    refresh_residuals(model, codes, residuals, l);
  }
}

double pwls_objective(const Image& x, const SparseCodeStack& codes, const PwlsProblem& problem,
                      const MrstModel& model, const ReconConfig& cfg, const PatchConfig& patch) {
  const auto residuals = residual_stack(extract_patches(x, patch), model, codes);
  return problem.data_term(x) + cfg.beta * learn_objective(model, codes, residuals, cfg.gammas);
}

OsLalmState start_image_update(const Image& x, const PwlsProblem& problem) {
  OsLalmState st;
  st.x = x;
  st.zeta = problem.subset_gradient(x, problem.subsets().size() - 1);
  st.g = st.zeta;
  const auto& d = problem.majorizer().values();
  st.h.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) st.h[i] = d[i] * x.values()[i] - st.zeta[i];
  st.s.assign(x.size(), 0.0);
  st.rho = 1.0;
  st.step = 0;
  return st;
}

void pwls_image_update(OsLalmState& state, const PwlsProblem& problem,
                       const RegularizerGradient& gradient, const Image& hessian_diag,
                       const ReconConfig& cfg) {
  const std::size_t n = state.x.size();
  const auto& da = problem.majorizer().values();
  const auto& dr = hessian_diag.values();
  const double alpha = cfg.alpha;
  const std::size_t m_count = problem.subsets().size();
  std::vector<double> grad;

  for (std::size_t pass = 0; pass < cfg.inner_iters; ++pass) {
    for (std::size_t m = 0; m < m_count; ++m) {
      const double rho = state.rho;
      auto& x = state.x.values();
      gradient.apply(state.x, grad);
      for (std::size_t i = 0; i < n; ++i) {
        state.s[i] = rho * (da[i] * x[i] - state.h[i]) + (1.0 - rho) * state.g[i];
        const double step = (state.s[i] + grad[i]) / (rho * da[i] + dr[i]);
        x[i] = std::max(0.0, x[i] - step);
      }
      for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(x[i])) {
          throw NumericError("image update produced a non-finite pixel at sub-iteration " +
                             std::to_string(state.step));
        }
      }
      state.zeta = problem.subset_gradient(state.x, m);
      const double a = rho / (rho + 1.0);
      const double b = 1.0 / (rho + 1.0);
      for (std::size_t i = 0; i < n; ++i) {
        state.g[i] = a * (alpha * state.zeta[i] + (1.0 - alpha) * state.g[i]) + b * state.g[i];
        state.h[i] = alpha * (da[i] * x[i] - state.zeta[i]) + (1.0 - alpha) * state.h[i];
      }
      ++state.step;
      state.rho = rho_schedule(state.step, alpha, cfg.rho_min);
    }
  }
}

namespace {

class MrstRegularizer {
 public:
  MrstRegularizer(const MrstModel& model, const ReconConfig& cfg, const PatchConfig& patch,
                  std::size_t width, std::size_t height)
      : model_(model), cfg_(cfg), patch_(patch), width_(width), height_(height) {}

  std::size_t layers() const { return model_.layers(); }

  SparseCodeStack zero_codes(std::size_t n) const { return mrst::zero_codes(model_, n); }

  RegularizerGradient gradient(const SparseCodeStack& codes) const {
    return RegularizerGradient::from_codes(model_, codes, cfg_.beta, patch_, width_, height_);
  }

  void sparse_code(const Image& x, SparseCodeStack& codes) const {
    sparse_code_all(x, model_, codes, cfg_.gammas, patch_);
  }

  double penalty(const Image& x, const SparseCodeStack& codes) const {
    const auto residuals = residual_stack(extract_patches(x, patch_), model_, codes);
    return learn_objective(model_, codes, residuals, cfg_.gammas);
  }

 private:
  const MrstModel& model_;
  const ReconConfig& cfg_;
  const PatchConfig& patch_;
  std::size_t width_;
  std::size_t height_;
};

}  // namespace

ReconResult reconstruct(const ct::SinogramSet& sino, const MrstModel& model,
                        const PatchConfig& patch, const ReconConfig& cfg, const Image& init,
                        const ReconOptions& opts) {
  model.validate();
  cfg.validate(model.layers(), sino.geometry.n_angles);
  if (patch.patch_size() != model.patch_size()) {
    throw ConfigError("patch size " + std::to_string(patch.patch_size()) +
                      " does not match the model (" + std::to_string(model.patch_size()) + ")");
  }
  const MrstRegularizer reg(model, cfg, patch, init.width(), init.height());
  return detail::run_outer_loop(sino, reg, patch, cfg, init, opts);
}

}  // namespace mrst::recon
