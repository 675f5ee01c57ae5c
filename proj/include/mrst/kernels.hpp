#pragma once

// Data-parallel inner loops used by the patch, transform and projection code.
//
// Every kernel has a portable scalar reference implementation. On x86-64 an
// AVX2+FMA variant is selected at runtime when the CPU supports it; the two
// are kept equivalent by tests/test_kernels.cpp (exact for selection-type
// kernels, 1e-12 relative for reductions whose summation order differs).
//
// Setting MRST_SIMD=scalar in the environment forces the reference table.

#include <cstddef>
#include <cstdint>
#include <string_view>

namespace mrst::simd {

enum class Isa { scalar, avx2 };

struct KernelTable {
  Isa isa;
  std::string_view name;

  // out[:, j] = M * in[:, j] for j < n_cols. M is p x p column-major; in and
  // out are p x n_cols column-major and must not alias.
  void (*apply_matrix)(const double* m, std::size_t p, const double* in, double* out,
                       std::size_t n_cols);

  // G += sum_j a[:, j] * b[:, j]^T. G is p x p column-major.
  void (*accumulate_outer)(const double* a, const double* b, std::size_t p, std::size_t n_cols,
                           double* g);

  // out[i] = |in[i]| >= threshold ? in[i] : 0. in and out may alias.
  void (*hard_threshold)(const double* in, double* out, std::size_t n, double threshold);

  double (*dot)(const double* a, const double* b, std::size_t n);

  // sum_i (a[i] - b[i])^2
  double (*squared_distance)(const double* a, const double* b, std::size_t n);

  std::size_t (*count_nonzero)(const double* a, std::size_t n);

  // out[i] = alpha * x[i] + beta * y[i]. out may alias x or y.
  void (*lincomb)(double alpha, const double* x, double beta, const double* y, double* out,
                  std::size_t n);

  // sum_k values[k] * x[index[k]]
  double (*sparse_dot)(const double* values, const std::uint32_t* index, std::size_t nnz,
                       const double* x);

  // x[index[k]] += alpha * values[k]
  void (*sparse_axpy)(const double* values, const std::uint32_t* index, std::size_t nnz,
                      double alpha, double* x);
};

const KernelTable& scalar_kernels();

/// nullptr when the variant was not compiled in or the CPU lacks the ISA.
const KernelTable* avx2_kernels();

/// The table used by the library. Chosen once on first use.
const KernelTable& active();

/// Overrides the active table. Returns false if the ISA is unavailable.
bool select(Isa isa);

}  // namespace mrst::simd
