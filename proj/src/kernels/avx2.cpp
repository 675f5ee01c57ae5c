// AVX2 + FMA variants. Compiled with -mavx2 -mfma; only reached after the
// dispatcher has confirmed CPU support.

#include <immintrin.h>

#include <cmath>

#include "mrst/kernels.hpp"

namespace mrst::simd {

namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

void apply_matrix(const double* m, std::size_t p, const double* in, double* out,
                  std::size_t n_cols) {
  for (std::size_t j = 0; j < n_cols; ++j) {
    const double* x = in + j * p;
    double* y = out + j * p;
    std::size_t i = 0;
    for (; i + 16 <= p; i += 16) {
      __m256d acc0 = _mm256_setzero_pd();
      __m256d acc1 = _mm256_setzero_pd();
      __m256d acc2 = _mm256_setzero_pd();
      __m256d acc3 = _mm256_setzero_pd();
      for (std::size_t k = 0; k < p; ++k) {
        const __m256d xk = _mm256_broadcast_sd(x + k);
        const double* col = m + k * p + i;
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(col), xk, acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(col + 4), xk, acc1);
        acc2 = _mm256_fmadd_pd(_mm256_loadu_pd(col + 8), xk, acc2);
        acc3 = _mm256_fmadd_pd(_mm256_loadu_pd(col + 12), xk, acc3);
      }
      _mm256_storeu_pd(y + i, acc0);
      _mm256_storeu_pd(y + i + 4, acc1);
      _mm256_storeu_pd(y + i + 8, acc2);
      _mm256_storeu_pd(y + i + 12, acc3);
    }
    for (; i + 4 <= p; i += 4) {
      __m256d acc = _mm256_setzero_pd();
      for (std::size_t k = 0; k < p; ++k) {
        acc = _mm256_fmadd_pd(_mm256_loadu_pd(m + k * p + i), _mm256_broadcast_sd(x + k), acc);
      }
      _mm256_storeu_pd(y + i, acc);
    }
    for (; i < p; ++i) {
      double s = 0.0;
      for (std::size_t k = 0; k < p; ++k) s = std::fma(m[k * p + i], x[k], s);
      y[i] = s;
    }
  }
}

void accumulate_outer(const double* a, const double* b, std::size_t p, std::size_t n_cols,
                      double* g) {
  for (std::size_t j = 0; j < n_cols; ++j) {
    const double* aj = a + j * p;
    const double* bj = b + j * p;
    for (std::size_t c = 0; c < p; ++c) {
      const __m256d s = _mm256_broadcast_sd(bj + c);
      double* gc = g + c * p;
      std::size_t r = 0;
      for (; r + 4 <= p; r += 4) {
        _mm256_storeu_pd(gc + r,
                         _mm256_fmadd_pd(_mm256_loadu_pd(aj + r), s, _mm256_loadu_pd(gc + r)));
      }
      for (; r < p; ++r) gc[r] = std::fma(aj[r], bj[c], gc[r]);
    }
  }
}

void hard_threshold(const double* in, double* out, std::size_t n, double threshold) {
  const __m256d sign = _mm256_set1_pd(-0.0);
  const __m256d thr = _mm256_set1_pd(threshold);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d v = _mm256_loadu_pd(in + i);
    const __m256d keep = _mm256_cmp_pd(_mm256_andnot_pd(sign, v), thr, _CMP_GE_OQ);
    _mm256_storeu_pd(out + i, _mm256_and_pd(v, keep));
  }
  for (; i < n; ++i) out[i] = std::abs(in[i]) >= threshold ? in[i] : 0.0;
}

double dot(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

double squared_distance(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256d d0 = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    const __m256d d1 = _mm256_sub_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4));
    acc0 = _mm256_fmadd_pd(d0, d0, acc0);
    acc1 = _mm256_fmadd_pd(d1, d1, acc1);
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

std::size_t count_nonzero(const double* a, std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  std::size_t c = 0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const int mask = _mm256_movemask_pd(_mm256_cmp_pd(_mm256_loadu_pd(a + i), zero, _CMP_NEQ_UQ));
    c += static_cast<std::size_t>(__builtin_popcount(static_cast<unsigned>(mask)));
  }
  for (; i < n; ++i) c += a[i] != 0.0;
  return c;
}

void lincomb(double alpha, const double* x, double beta, const double* y, double* out,
             std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  const __m256d vb = _mm256_set1_pd(beta);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d t = _mm256_mul_pd(vb, _mm256_loadu_pd(y + i));
    _mm256_storeu_pd(out + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), t));
  }
  for (; i < n; ++i) out[i] = std::fma(alpha, x[i], beta * y[i]);
}

double sparse_dot(const double* values, const std::uint32_t* index, std::size_t nnz,
                  const double* x) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t k = 0;
  for (; k + 4 <= nnz; k += 4) {
    const __m128i idx = _mm_loadu_si128(reinterpret_cast<const __m128i*>(index + k));
    const __m256d xv = _mm256_i32gather_pd(x, idx, 8);
    acc = _mm256_fmadd_pd(_mm256_loadu_pd(values + k), xv, acc);
  }
  double s = hsum(acc);
  for (; k < nnz; ++k) s += values[k] * x[index[k]];
  return s;
}

// Scatter has no AVX2 instruction; the multiply is cheap relative to the
// dependent stores, so this stays scalar.
void sparse_axpy(const double* values, const std::uint32_t* index, std::size_t nnz, double alpha,
                 double* x) {
  for (std::size_t k = 0; k < nnz; ++k) x[index[k]] += alpha * values[k];
}

}  // namespace

const KernelTable& avx2_table() {
  static const KernelTable table{
      Isa::avx2,       "avx2",        apply_matrix, accumulate_outer, hard_threshold, dot,
      squared_distance, count_nonzero, lincomb,      sparse_dot,       sparse_axpy,
  };
  return table;
}

}  // namespace mrst::simd
