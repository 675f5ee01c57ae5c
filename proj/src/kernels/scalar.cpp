#include <cmath>

#include "mrst/kernels.hpp"

namespace mrst::simd {

namespace {

void apply_matrix(const double* m, std::size_t p, const double* in, double* out,
                  std::size_t n_cols) {
  for (std::size_t j = 0; j < n_cols; ++j) {
    const double* x = in + j * p;
    double* y = out + j * p;
    for (std::size_t i = 0; i < p; ++i) y[i] = 0.0;
    for (std::size_t k = 0; k < p; ++k) {
      const double xk = x[k];
      const double* col = m + k * p;
      for (std::size_t i = 0; i < p; ++i) y[i] += col[i] * xk;
    }
  }
}

void accumulate_outer(const double* a, const double* b, std::size_t p, std::size_t n_cols,
                      double* g) {
  for (std::size_t j = 0; j < n_cols; ++j) {
    const double* aj = a + j * p;
    const double* bj = b + j * p;
    for (std::size_t c = 0; c < p; ++c) {
      const double s = bj[c];
      double* gc = g + c * p;
      for (std::size_t r = 0; r < p; ++r) gc[r] += aj[r] * s;
    }
  }
}

void hard_threshold(const double* in, double* out, std::size_t n, double threshold) {
  for (std::size_t i = 0; i < n; ++i) out[i] = std::abs(in[i]) >= threshold ? in[i] : 0.0;
}

double dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

double squared_distance(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

std::size_t count_nonzero(const double* a, std::size_t n) {
  std::size_t c = 0;
  for (std::size_t i = 0; i < n; ++i) c += a[i] != 0.0;
  return c;
}

void lincomb(double alpha, const double* x, double beta, const double* y, double* out,
             std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = alpha * x[i] + beta * y[i];
}

double sparse_dot(const double* values, const std::uint32_t* index, std::size_t nnz,
                  const double* x) {
  double s = 0.0;
  for (std::size_t k = 0; k < nnz; ++k) s += values[k] * x[index[k]];
  return s;
}

void sparse_axpy(const double* values, const std::uint32_t* index, std::size_t nnz, double alpha,
                 double* x) {
  for (std::size_t k = 0; k < nnz; ++k) x[index[k]] += alpha * values[k];
}

}  // namespace

const KernelTable& scalar_kernels() {
  static const KernelTable table{
      Isa::scalar,     "scalar",      apply_matrix, accumulate_outer, hard_threshold, dot,
      squared_distance, count_nonzero, lincomb,      sparse_dot,       sparse_axpy,
  };
  return table;
}

}  // namespace mrst::simd
