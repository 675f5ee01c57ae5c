#pragma once

// Multi-layer residual sparsifying transform (MRST) model and its exact block
// coordinate descent learner.
//
// Layers are indexed from 0 throughout this API: transforms[l] and codes[l]
// belong to layer l, residuals[l] is the input of layer l (residuals[0] is
// the training data) and
//
//   residuals[l + 1] = transforms[l] * residuals[l] - codes[l].
//
// The learning cost is
//
//   sum_l ||transforms[l] * residuals[l] - codes[l]||_F^2 + eta_l^2 ||codes[l]||_0
//
// with every transform constrained to be orthogonal.

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "mrst/imaging.hpp"

namespace mrst {

using Matrix = Eigen::MatrixXd;

struct MrstModel {
  std::vector<Matrix> transforms;
  std::vector<double> thresholds;  // eta_l used while learning

  std::size_t layers() const noexcept { return transforms.size(); }
  std::size_t patch_size() const noexcept {
    return transforms.empty() ? 0 : static_cast<std::size_t>(transforms.front().rows());
  }

  /// max_l ||W_l^T W_l - I||_F
  double max_unitarity_error() const;

  /// Throws ConfigError on inconsistent shapes or when a transform is not
  /// orthogonal to within `tolerance`.
  void validate(double tolerance = 1e-8) const;

  friend bool operator==(const MrstModel&, const MrstModel&) = default;
};

/// One code matrix per layer, each p x N.
using SparseCodeStack = std::vector<PatchMatrix>;

struct LearnConfig {
  std::size_t iterations = 100;
  std::vector<double> thresholds;  // eta_l; its length sets the layer count
  PatchConfig patch;
  std::size_t max_patches = 0;  // 0 keeps every training patch
  std::uint64_t seed = 0;

  void validate() const;
};

/// eta_l = first * ratio^l for l < layers.
std::vector<double> geometric_thresholds(std::size_t layers, double first, double ratio);

/// Orthonormal 2D DCT-II acting on row-major vectorized side x side patches.
Matrix dct2_matrix(std::size_t side);

/// Layer 0 starts from the 2D DCT, deeper layers from the identity.
/// Thresholds are zero. Throws ConfigError unless p is a perfect square.
MrstModel init_model(std::size_t layers, std::size_t p);

/// out = M * in, column by column.
PatchMatrix apply_transform(const Matrix& m, const PatchMatrix& in);

/// An all-zero code stack matching `model` with n columns.
SparseCodeStack zero_codes(const MrstModel& model, std::size_t n);

/// [R_0, ..., R_{L-1}] from the residual recursion.
std::vector<PatchMatrix> residual_stack(const PatchMatrix& input, const MrstModel& model,
                                        const SparseCodeStack& codes);

/// Recomputes residuals[l + 1 ...] after layer `l` changed.
void refresh_residuals(const MrstModel& model, const SparseCodeStack& codes,
                       std::vector<PatchMatrix>& residuals, std::size_t l);

/// Backpropagation matrix from layer boundary q down to boundary p:
///
///   B_p^q = sum_{k=p}^{q-1} (W_p^T W_{p+1}^T ... W_k^T) codes[k],
///
/// requiring 0 <= p < q <= L. B_p^{p+1} = W_p^T codes[p].
PatchMatrix backprop_matrix(const MrstModel& model, const SparseCodeStack& codes, std::size_t p,
                            std::size_t q);

/// sum_{q=p+1}^{L} B_p^q, evaluated by a Horner recursion over layers.
/// Returns an empty matrix when p == L.
PatchMatrix backprop_sum(const MrstModel& model, const SparseCodeStack& codes, std::size_t p);

/// Unthresholded minimizer for layer l:
///   W_l R_l - backprop_sum(l + 1) / (L - l).
PatchMatrix sparse_code_target(const MrstModel& model, const SparseCodeStack& codes,
                               const std::vector<PatchMatrix>& residuals, std::size_t l);

/// Exact minimizer of the cost over codes[l] with everything else fixed, for
/// the layer threshold `eta`: H_{eta / sqrt(L - l)}(target). Entries whose
/// magnitude equals the threshold are kept. Residuals must be current.
PatchMatrix sparse_code(const MrstModel& model, const SparseCodeStack& codes,
                        const std::vector<PatchMatrix>& residuals, std::size_t l, double eta);

/// sparse_code with the model's learning threshold for layer l.
PatchMatrix sparse_code_learn(const MrstModel& model, const SparseCodeStack& codes,
                              const std::vector<PatchMatrix>& residuals, std::size_t l);

/// The p x p matrix G_l = R_l (codes[l] + backprop_sum(l + 1) / (L - l))^T.
Matrix transform_gradient_matrix(const MrstModel& model, const SparseCodeStack& codes,
                                 const std::vector<PatchMatrix>& residuals, std::size_t l);

/// V U^T from a full SVD G = U S V^T; maximizes tr(W G) over orthogonal W.
/// Throws NumericError when G is not finite.
Matrix procrustes_rotation(const Matrix& g);

/// Exact minimizer over transforms[l] with everything else fixed.
Matrix transform_update(const MrstModel& model, const SparseCodeStack& codes,
                        const std::vector<PatchMatrix>& residuals, std::size_t l);

/// Sum over layers of ||W_l R_l - Z_l||_F^2 + thresholds[l]^2 * nnz(Z_l).
double learn_objective(const MrstModel& model, const SparseCodeStack& codes,
                       const std::vector<PatchMatrix>& residuals,
                       std::span<const double> thresholds);

enum class BlockKind { codes, transform };

/// Passed to the learning observer after every block update.
struct LearnStep {
  std::size_t iteration;
  BlockKind kind;
  std::size_t layer;
  const MrstModel& model;
  const SparseCodeStack& codes;
  const std::vector<PatchMatrix>& residuals;
};

using LearnObserver = std::function<void(const LearnStep&)>;

struct LearnResult {
  MrstModel model;
  SparseCodeStack codes;
  double initial_objective = 0.0;
  std::vector<double> objective_trace;  // value after each full iteration
};

/// Block coordinate descent. Each iteration updates codes[0..L) and then
/// transforms[0..L), refreshing downstream residuals after every block.
/// Starts from init_model and all-zero codes unless `start` is given.
LearnResult learn(const PatchMatrix& training, const LearnConfig& cfg,
                  const LearnObserver& observer = {}, const MrstModel* start = nullptr);

/// Patches from every image, optionally subsampled to cfg.max_patches
/// columns using cfg.seed.
PatchMatrix training_patches(std::span<const Image> images, const LearnConfig& cfg);

}  // namespace mrst
