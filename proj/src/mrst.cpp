#include "mrst/mrst.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "mrst/error.hpp"
#include "mrst/kernels.hpp"
#include "mrst/parallel.hpp"

namespace mrst {

namespace {

void require_layer(const MrstModel& model, std::size_t l, const char* what) {
  if (l >= model.layers()) {
    throw ConfigError(std::string(what) + ": layer " + std::to_string(l) + " out of range for " +
                      std::to_string(model.layers()) + "-layer model");
  }
}

void require_codes(const MrstModel& model, const SparseCodeStack& codes) {
  if (codes.size() != model.layers()) {
    throw ConfigError("code stack has " + std::to_string(codes.size()) + " layers, model has " +
                      std::to_string(model.layers()));
  }
  for (const auto& z : codes) {
    if (z.rows() != model.patch_size() || z.cols() != codes.front().cols()) {
      throw ConfigError("code matrix shape does not match the model");
    }
  }
}

PatchMatrix scaled(const PatchMatrix& a, double s) {
  if (s == 1.0) return a;
  PatchMatrix out(a.rows(), a.cols());
  simd::active().lincomb(s, a.raw(), 0.0, a.raw(), out.raw(), a.size());
  return out;
}

}  // namespace

double MrstModel::max_unitarity_error() const {
  double worst = 0.0;
  for (const auto& w : transforms) {
    const Matrix e = w.transpose() * w - Matrix::Identity(w.rows(), w.cols());
    worst = std::max(worst, e.norm());
  }
  return worst;
}

void MrstModel::validate(double tolerance) const {
  if (transforms.empty()) throw ConfigError("model has no layers");
  if (thresholds.size() != transforms.size()) {
    throw ConfigError("model has " + std::to_string(transforms.size()) + " transforms but " +
                      std::to_string(thresholds.size()) + " thresholds");
  }
  const auto p = transforms.front().rows();
  for (std::size_t l = 0; l < transforms.size(); ++l) {
    if (transforms[l].rows() != p || transforms[l].cols() != p) {
      throw ConfigError("transform " + std::to_string(l) + " is not " + std::to_string(p) + "x" +
                        std::to_string(p));
    }
    if (!transforms[l].allFinite()) {
      throw ConfigError("transform " + std::to_string(l) + " has non-finite entries");
    }
  }
  if (const double e = max_unitarity_error(); !(e <= tolerance)) {
    throw ConfigError("transform is not orthogonal: ||W^T W - I||_F = " + std::to_string(e));
  }
}

void LearnConfig::validate() const {
  if (iterations < 1) throw ConfigError("learn.iterations must be >= 1");
  if (thresholds.empty()) throw ConfigError("learn.thresholds must name at least one layer");
  for (double t : thresholds) {
    if (!(t >= 0.0) || !std::isfinite(t)) throw ConfigError("learn thresholds must be >= 0");
  }
}

std::vector<double> geometric_thresholds(std::size_t layers, double first, double ratio) {
  std::vector<double> out(layers);
  double v = first;
  for (auto& t : out) {
    t = v;
    v *= ratio;
  }
  return out;
}

Matrix dct2_matrix(std::size_t side) {
  Matrix c(side, side);
  const double n = static_cast<double>(side);
  for (std::size_t k = 0; k < side; ++k) {
    const double s = k == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
    for (std::size_t i = 0; i < side; ++i) {
      c(k, i) = s * std::cos(std::numbers::pi * (2.0 * i + 1.0) * k / (2.0 * n));
    }
  }
  Matrix out(side * side, side * side);
  for (std::size_t k1 = 0; k1 < side; ++k1)
    for (std::size_t k2 = 0; k2 < side; ++k2)
      for (std::size_t r = 0; r < side; ++r)
        for (std::size_t col = 0; col < side; ++col)
          out(k1 * side + k2, r * side + col) = c(k1, r) * c(k2, col);
  return out;
}

MrstModel init_model(std::size_t layers, std::size_t p) {
  if (layers < 1) throw ConfigError("model needs at least one layer");
  const auto side = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(p))));
  if (p == 0 || side * side != p) {
    throw ConfigError("patch size " + std::to_string(p) + " is not a perfect square");
  }
  MrstModel m;
  m.transforms.push_back(dct2_matrix(side));
  for (std::size_t l = 1; l < layers; ++l) m.transforms.push_back(Matrix::Identity(p, p));
  m.thresholds.assign(layers, 0.0);
  return m;
}

PatchMatrix apply_transform(const Matrix& m, const PatchMatrix& in) {
  const std::size_t p = in.rows();
  if (static_cast<std::size_t>(m.rows()) != p || static_cast<std::size_t>(m.cols()) != p) {
    throw ConfigError("transform size does not match patch size " + std::to_string(p));
  }
  PatchMatrix out(p, in.cols());
  const auto& k = simd::active();
  parallel_for(in.cols(), [&](std::size_t b, std::size_t e) {
    k.apply_matrix(m.data(), p, in.raw() + b * p, out.raw() + b * p, e - b);
  }, 512);
  return out;
}

SparseCodeStack zero_codes(const MrstModel& model, std::size_t n) {
  return SparseCodeStack(model.layers(), PatchMatrix(model.patch_size(), n));
}

std::vector<PatchMatrix> residual_stack(const PatchMatrix& input, const MrstModel& model,
                                        const SparseCodeStack& codes) {
  require_codes(model, codes);
  if (input.rows() != model.patch_size() || (!codes.empty() && !input.same_shape(codes[0]))) {
    throw ConfigError("residual input shape does not match the model and codes");
  }
  std::vector<PatchMatrix> r;
  r.reserve(model.layers());
  r.push_back(input);
  for (std::size_t l = 0; l + 1 < model.layers(); ++l) r.emplace_back();
  refresh_residuals(model, codes, r, 0);
  return r;
}

void refresh_residuals(const MrstModel& model, const SparseCodeStack& codes,
                       std::vector<PatchMatrix>& residuals, std::size_t l) {
  const auto& k = simd::active();
  for (std::size_t i = l; i + 1 < model.layers(); ++i) {
    PatchMatrix next = apply_transform(model.transforms[i], residuals[i]);
    k.lincomb(1.0, next.raw(), -1.0, codes[i].raw(), next.raw(), next.size());
    residuals[i + 1] = std::move(next);
  }
}

PatchMatrix backprop_matrix(const MrstModel& model, const SparseCodeStack& codes, std::size_t p,
                            std::size_t q) {
  require_codes(model, codes);
  if (!(p < q && q <= model.layers())) {
    throw ConfigError("backprop_matrix needs 0 <= p < q <= L, got p=" + std::to_string(p) +
                      " q=" + std::to_string(q));
  }
  const auto& k = simd::active();
  PatchMatrix acc = apply_transform(model.transforms[q - 1].transpose(), codes[q - 1]);
  for (std::size_t i = q - 1; i-- > p;) {
    k.lincomb(1.0, codes[i].raw(), 1.0, acc.raw(), acc.raw(), acc.size());
    acc = apply_transform(model.transforms[i].transpose(), acc);
  }
  return acc;
}

PatchMatrix backprop_sum(const MrstModel& model, const SparseCodeStack& codes, std::size_t p) {
  require_codes(model, codes);
  const std::size_t layers = model.layers();
  if (p > layers) throw ConfigError("backprop_sum: boundary beyond the last layer");
  if (p == layers) return {};
  const auto& k = simd::active();
  PatchMatrix acc;
  for (std::size_t i = layers; i-- > p;) {
    PatchMatrix t = scaled(codes[i], static_cast<double>(layers - i));
    if (i + 1 < layers) k.lincomb(1.0, t.raw(), 1.0, acc.raw(), t.raw(), t.size());
    acc = apply_transform(model.transforms[i].transpose(), t);
  }
  return acc;
}

PatchMatrix sparse_code_target(const MrstModel& model, const SparseCodeStack& codes,
                               const std::vector<PatchMatrix>& residuals, std::size_t l) {
  require_layer(model, l, "sparse_code");
  require_codes(model, codes);
  PatchMatrix t = apply_transform(model.transforms[l], residuals.at(l));
  const std::size_t layers = model.layers();
  if (l + 1 < layers) {
    const PatchMatrix tail = backprop_sum(model, codes, l + 1);
    const double w = 1.0 / static_cast<double>(layers - l);
    simd::active().lincomb(1.0, t.raw(), -w, tail.raw(), t.raw(), t.size());
  }
  return t;
}

PatchMatrix sparse_code(const MrstModel& model, const SparseCodeStack& codes,
                        const std::vector<PatchMatrix>& residuals, std::size_t l, double eta) {
  PatchMatrix z = sparse_code_target(model, codes, residuals, l);
  const std::size_t depth = model.layers() - l;
  const double threshold = depth == 1 ? eta : eta / std::sqrt(static_cast<double>(depth));
  const auto& k = simd::active();
  parallel_for(z.size(), [&](std::size_t b, std::size_t e) {
    k.hard_threshold(z.raw() + b, z.raw() + b, e - b, threshold);
  }, 1 << 14);
  return z;
}

PatchMatrix sparse_code_learn(const MrstModel& model, const SparseCodeStack& codes,
                              const std::vector<PatchMatrix>& residuals, std::size_t l) {
  require_layer(model, l, "sparse_code_learn");
  return sparse_code(model, codes, residuals, l, model.thresholds.at(l));
}

Matrix transform_gradient_matrix(const MrstModel& model, const SparseCodeStack& codes,
                                 const std::vector<PatchMatrix>& residuals, std::size_t l) {
  require_layer(model, l, "transform_update");
  require_codes(model, codes);
  const std::size_t layers = model.layers();
  const PatchMatrix* rhs = &codes[l];
  PatchMatrix combined;
  if (l + 1 < layers) {
    const PatchMatrix tail = backprop_sum(model, codes, l + 1);
    combined = PatchMatrix(tail.rows(), tail.cols());
    simd::active().lincomb(1.0, codes[l].raw(), 1.0 / static_cast<double>(layers - l), tail.raw(),
                           combined.raw(), combined.size());
    rhs = &combined;
  }
  const PatchMatrix& r = residuals.at(l);
  const std::size_t p = r.rows();
  Matrix g = Matrix::Zero(p, p);
  simd::active().accumulate_outer(r.raw(), rhs->raw(), p, r.cols(), g.data());
  return g;
}

Matrix procrustes_rotation(const Matrix& g) {
  if (!g.allFinite()) throw NumericError("transform update: non-finite matrix passed to SVD");
  Eigen::JacobiSVD<Matrix> svd(g, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Matrix w = svd.matrixV() * svd.matrixU().transpose();
  if (!w.allFinite()) throw NumericError("transform update: SVD produced non-finite factors");
  return w;
}

Matrix transform_update(const MrstModel& model, const SparseCodeStack& codes,
                        const std::vector<PatchMatrix>& residuals, std::size_t l) {
  return procrustes_rotation(transform_gradient_matrix(model, codes, residuals, l));
}

double learn_objective(const MrstModel& model, const SparseCodeStack& codes,
                       const std::vector<PatchMatrix>& residuals,
                       std::span<const double> thresholds) {
  require_codes(model, codes);
  if (thresholds.size() != model.layers() || residuals.size() != model.layers()) {
    throw ConfigError("learn_objective: per-layer inputs do not match the model");
  }
  const auto& k = simd::active();
  double total = 0.0;
  for (std::size_t l = 0; l < model.layers(); ++l) {
    const PatchMatrix t = apply_transform(model.transforms[l], residuals[l]);
    total += k.squared_distance(t.raw(), codes[l].raw(), t.size());
    total += thresholds[l] * thresholds[l] *
             static_cast<double>(k.count_nonzero(codes[l].raw(), codes[l].size()));
  }
  return total;
}

LearnResult learn(const PatchMatrix& training, const LearnConfig& cfg,
                  const LearnObserver& observer, const MrstModel* start) {
  cfg.validate();
  for (double v : training.values()) {
    if (!std::isfinite(v)) throw InputError("training data contains non-finite values");
  }
  if (training.cols() == 0) throw InputError("training data has no patches");
  const std::size_t layers = cfg.thresholds.size();

  LearnResult out;
  out.model = start ? *start : init_model(layers, training.rows());
  if (out.model.layers() != layers || out.model.patch_size() != training.rows()) {
    throw ConfigError("starting model does not match the learning configuration");
  }
  out.model.thresholds = cfg.thresholds;
  out.codes = zero_codes(out.model, training.cols());
  auto residuals = residual_stack(training, out.model, out.codes);
  out.initial_objective = learn_objective(out.model, out.codes, residuals, cfg.thresholds);
  out.objective_trace.reserve(cfg.iterations);

  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    for (std::size_t l = 0; l < layers; ++l) {
      out.codes[l] = sparse_code_learn(out.model, out.codes, residuals, l);
      refresh_residuals(out.model, out.codes, residuals, l);
      if (observer) observer({it, BlockKind::codes, l, out.model, out.codes, residuals});
    }
    for (std::size_t l = 0; l < layers; ++l) {
      out.model.transforms[l] = transform_update(out.model, out.codes, residuals, l);
      refresh_residuals(out.model, out.codes, residuals, l);
      if (observer) observer({it, BlockKind::transform, l, out.model, out.codes, residuals});
    }
    out.objective_trace.push_back(
        learn_objective(out.model, out.codes, residuals, cfg.thresholds));
  }
  return out;
}

PatchMatrix training_patches(std::span<const Image> images, const LearnConfig& cfg) {
  if (images.empty()) throw InputError("no training images");
  std::vector<PatchMatrix> parts;
  std::size_t total = 0;
  for (const auto& img : images) {
    img.check_finite("training image");
    parts.push_back(extract_patches(img, cfg.patch));
    total += parts.back().cols();
  }
  const std::size_t p = cfg.patch.patch_size();
  std::vector<std::size_t> order(total);
  for (std::size_t i = 0; i < total; ++i) order[i] = i;
  std::size_t keep = total;
  if (cfg.max_patches > 0 && cfg.max_patches < total) {
    std::mt19937_64 rng(cfg.seed);
    for (std::size_t i = 0; i < cfg.max_patches; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng() % (total - i));
      std::swap(order[i], order[j]);
    }
    keep = cfg.max_patches;
  }
  PatchMatrix out(p, keep);
  for (std::size_t c = 0; c < keep; ++c) {
    std::size_t idx = order[c];
    std::size_t part = 0;
    while (idx >= parts[part].cols()) idx -= parts[part++].cols();
    const auto src = parts[part].col(idx);
    std::copy(src.begin(), src.end(), out.col(c).begin());
  }
  return out;
}

}  // namespace mrst
