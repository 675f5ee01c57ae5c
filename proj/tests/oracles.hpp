#pragma once

// Independent reference computations used by the tests. Everything here is
// written directly from the defining formulas with dense Eigen matrices and
// plain loops, sharing no code with the library.

#include <Eigen/Dense>
#include <cmath>
#include <cstddef>
#include <random>
#include <vector>

#include "mrst/imaging.hpp"
#include "mrst/mrst.hpp"

namespace oracle {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline MatrixXd to_eigen(const mrst::PatchMatrix& pm) {
  MatrixXd m(pm.rows(), pm.cols());
  for (std::size_t c = 0; c < pm.cols(); ++c)
    for (std::size_t r = 0; r < pm.rows(); ++r) m(r, c) = pm(r, c);
  return m;
}

inline mrst::PatchMatrix from_eigen(const MatrixXd& m) {
  mrst::PatchMatrix pm(m.rows(), m.cols());
  for (Eigen::Index c = 0; c < m.cols(); ++c)
    for (Eigen::Index r = 0; r < m.rows(); ++r) pm(r, c) = m(r, c);
  return pm;
}

inline MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng,
                              double scale = 1.0) {
  std::normal_distribution<double> d(0.0, scale);
  MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = d(rng);
  return m;
}

/// Haar-distributed orthogonal matrix from a sign-corrected QR.
inline MatrixXd random_orthogonal(Eigen::Index p, std::mt19937_64& rng) {
  const MatrixXd a = random_matrix(p, p, rng);
  Eigen::HouseholderQR<MatrixXd> qr(a);
  MatrixXd q = qr.householderQ();
  const MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index i = 0; i < p; ++i)
    if (r(i, i) < 0) q.col(i) *= -1.0;
  return q;
}

inline mrst::Image random_image(std::size_t w, std::size_t h, std::mt19937_64& rng,
                                double lo = 0.0, double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  mrst::Image img(w, h);
  for (auto& v : img.values()) v = d(rng);
  return img;
}

/// Explicit P_j as a dense p x (w h) selection matrix.
inline MatrixXd patch_operator(std::size_t w, std::size_t h, std::size_t side, std::size_t row0,
                               std::size_t col0) {
  MatrixXd p = MatrixXd::Zero(side * side, w * h);
  for (std::size_t r = 0; r < side; ++r)
    for (std::size_t c = 0; c < side; ++c) p(r * side + c, (row0 + r) * w + col0 + c) = 1.0;
  return p;
}

/// Every window origin of a sliding-window grid, including the border-flush
/// extra window when the stride does not divide evenly.
inline std::vector<std::size_t> window_starts(std::size_t extent, std::size_t side,
                                              std::size_t stride) {
  std::vector<std::size_t> s;
  for (std::size_t o = 0; o + side <= extent; o += stride) s.push_back(o);
  if (s.back() + side != extent) s.push_back(extent - side);
  return s;
}

struct Stack {
  std::vector<MatrixXd> w;
  std::vector<MatrixXd> z;
};

inline Stack to_stack(const mrst::MrstModel& model, const mrst::SparseCodeStack& codes) {
  Stack s;
  for (std::size_t l = 0; l < model.layers(); ++l) {
    s.w.push_back(model.transforms[l]);
    s.z.push_back(to_eigen(codes[l]));
  }
  return s;
}

inline std::vector<MatrixXd> residuals(const MatrixXd& r0, const Stack& s) {
  std::vector<MatrixXd> r{r0};
  for (std::size_t l = 0; l + 1 < s.w.size(); ++l) r.push_back(s.w[l] * r[l] - s.z[l]);
  return r;
}

/// B_p^q written term by term from its definition.
inline MatrixXd backprop(const Stack& s, std::size_t p, std::size_t q) {
  MatrixXd out = MatrixXd::Zero(s.z[0].rows(), s.z[0].cols());
  for (std::size_t k = p; k < q; ++k) {
    MatrixXd chain = MatrixXd::Identity(s.w[0].rows(), s.w[0].cols());
    for (std::size_t i = p; i <= k; ++i) chain = chain * s.w[i].transpose();
    out += chain * s.z[k];
  }
  return out;
}

inline double objective(const MatrixXd& r0, const Stack& s, const std::vector<double>& eta) {
  const auto r = residuals(r0, s);
  double total = 0.0;
  for (std::size_t l = 0; l < s.w.size(); ++l) {
    total += (s.w[l] * r[l] - s.z[l]).squaredNorm();
    std::size_t nnz = 0;
    for (Eigen::Index i = 0; i < s.z[l].size(); ++i) nnz += s.z[l].data()[i] != 0.0;
    total += eta[l] * eta[l] * static_cast<double>(nnz);
  }
  return total;
}

/// Lawson-Hanson active-set solution of min ||A x - b||^2 subject to x >= 0.
inline VectorXd nnls(const MatrixXd& a, const VectorXd& b, double tol = 1e-12) {
  const Eigen::Index n = a.cols();
  VectorXd x = VectorXd::Zero(n);
  std::vector<bool> passive(n, false);
  auto solve_passive = [&](VectorXd& z) {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index j = 0; j < n; ++j)
      if (passive[j]) idx.push_back(j);
    MatrixXd ap(a.rows(), idx.size());
    for (std::size_t k = 0; k < idx.size(); ++k) ap.col(k) = a.col(idx[k]);
    const VectorXd sol = ap.colPivHouseholderQr().solve(b);
    z.setZero(n);
    for (std::size_t k = 0; k < idx.size(); ++k) z(idx[k]) = sol(k);
  };
  for (int outer = 0; outer < 10 * n; ++outer) {
    const VectorXd w = a.transpose() * (b - a * x);
    Eigen::Index best = -1;
    double best_w = tol * (1.0 + w.cwiseAbs().maxCoeff());
    for (Eigen::Index j = 0; j < n; ++j)
      if (!passive[j] && w(j) > best_w) {
        best_w = w(j);
        best = j;
      }
    if (best < 0) break;
    passive[best] = true;
    VectorXd z;
    for (;;) {
      solve_passive(z);
      bool feasible = true;
      for (Eigen::Index j = 0; j < n; ++j)
        if (passive[j] && z(j) <= 0) feasible = false;
      if (feasible) break;
      double step = 1.0;
      for (Eigen::Index j = 0; j < n; ++j)
        if (passive[j] && z(j) <= 0) step = std::min(step, x(j) / (x(j) - z(j)));
      x += step * (z - x);
      for (Eigen::Index j = 0; j < n; ++j)
        if (passive[j] && x(j) <= 1e-15) {
          passive[j] = false;
          x(j) = 0.0;
        }
    }
    x = z;
  }
  return x;
}

}  // namespace oracle
