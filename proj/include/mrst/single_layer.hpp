#pragma once

// Single-layer sparsifying transform (ST) learning and PWLS-ST
// reconstruction, written without the multi-layer machinery. Used as the
// reference the one-layer MRST path must reproduce bit for bit.

#include <vector>

#include "mrst/mrst.hpp"
#include "mrst/recon.hpp"

namespace mrst::st {

struct LearnResult {
  Matrix transform;
  PatchMatrix codes;
  double initial_objective = 0.0;
  std::vector<double> objective_trace;
};

/// Alternates Z = H_eta(W X) and W = V U^T from the SVD of X Z^T, starting
/// from the 2D DCT.
LearnResult learn(const PatchMatrix& training, std::size_t iterations, double eta);

/// ||W X - Z||_F^2 + eta^2 nnz(Z)
double objective(const Matrix& transform, const PatchMatrix& patches, const PatchMatrix& codes,
                 double eta);

/// PWLS-ST; cfg.gammas must hold exactly one threshold.
recon::ReconResult reconstruct(const ct::SinogramSet& sino, const Matrix& transform,
                               const PatchConfig& patch, const recon::ReconConfig& cfg,
                               const Image& init, const recon::ReconOptions& opts = {});

}  // namespace mrst::st
