// Compiled with -mavx2 (and deliberately without -mfma): every lane performs
// the same rounded multiply-then-add sequence as the scalar reference.
#include <immintrin.h>

#include <cmath>

#include "nnviz/kernels.hpp"

namespace nnviz::kernels {
namespace {

// In-register 4x4 transpose: rows r0..r3 become columns c0..c3.
inline void transpose4(__m256d r0, __m256d r1, __m256d r2, __m256d r3, __m256d& c0, __m256d& c1,
                       __m256d& c2, __m256d& c3) {
  const __m256d t0 = _mm256_unpacklo_pd(r0, r1);
  const __m256d t1 = _mm256_unpackhi_pd(r0, r1);
  const __m256d t2 = _mm256_unpacklo_pd(r2, r3);
  const __m256d t3 = _mm256_unpackhi_pd(r2, r3);
  c0 = _mm256_permute2f128_pd(t0, t2, 0x20);
  c1 = _mm256_permute2f128_pd(t1, t3, 0x20);
  c2 = _mm256_permute2f128_pd(t0, t2, 0x31);
  c3 = _mm256_permute2f128_pd(t1, t3, 0x31);
}

inline __m256d madd(__m256d acc, __m256d a, __m256d b) { return _mm256_add_pd(acc, _mm256_mul_pd(a, b)); }

// Four rows at a time; lane r accumulates row i+r in ascending k.
void gemv(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y) {
  std::size_t i = 0;
  for (; i + 4 <= rows; i += 4) {
    const double* p0 = a + i * cols;
    const double* p1 = p0 + cols;
    const double* p2 = p1 + cols;
    const double* p3 = p2 + cols;
    __m256d acc = _mm256_setzero_pd();
    std::size_t k = 0;
    for (; k + 4 <= cols; k += 4) {
      __m256d c0, c1, c2, c3;
      transpose4(_mm256_loadu_pd(p0 + k), _mm256_loadu_pd(p1 + k), _mm256_loadu_pd(p2 + k),
                 _mm256_loadu_pd(p3 + k), c0, c1, c2, c3);
      acc = madd(acc, c0, _mm256_broadcast_sd(x + k));
      acc = madd(acc, c1, _mm256_broadcast_sd(x + k + 1));
      acc = madd(acc, c2, _mm256_broadcast_sd(x + k + 2));
      acc = madd(acc, c3, _mm256_broadcast_sd(x + k + 3));
    }
    for (; k < cols; ++k) {
      const __m256d col = _mm256_set_pd(p3[k], p2[k], p1[k], p0[k]);
      acc = madd(acc, col, _mm256_broadcast_sd(x + k));
    }
    _mm256_storeu_pd(y + i, acc);
  }
  for (; i < rows; ++i) {
    const double* row = a + i * cols;
    double sum = 0.0;
    for (std::size_t k = 0; k < cols; ++k) sum += row[k] * x[k];
    y[i] = sum;
  }
}

void gemv_t_acc(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y) {
  std::size_t j = 0;
  for (; j + 4 <= cols; j += 4) {
    __m256d acc = _mm256_loadu_pd(y + j);
    for (std::size_t i = 0; i < rows; ++i) {
      acc = madd(acc, _mm256_loadu_pd(a + i * cols + j), _mm256_broadcast_sd(x + i));
    }
    _mm256_storeu_pd(y + j, acc);
  }
  for (; j < cols; ++j) {
    double sum = y[j];
    for (std::size_t i = 0; i < rows; ++i) sum += a[i * cols + j] * x[i];
    y[j] = sum;
  }
}

void ger_acc(double* a, std::size_t rows, std::size_t cols, const double* u, const double* v) {
  for (std::size_t i = 0; i < rows; ++i) {
    double* row = a + i * cols;
    const __m256d ui = _mm256_broadcast_sd(u + i);
    std::size_t j = 0;
    for (; j + 4 <= cols; j += 4) {
      _mm256_storeu_pd(row + j, madd(_mm256_loadu_pd(row + j), ui, _mm256_loadu_pd(v + j)));
    }
    for (; j < cols; ++j) row[j] += u[i] * v[j];
  }
}

void axpy(std::size_t n, double alpha, const double* x, double* y) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, madd(_mm256_loadu_pd(y + i), va, _mm256_loadu_pd(x + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void gemm(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    double* crow = c + i * n;
    std::size_t j = 0;
    for (; j + 4 <= n; j += 4) {
      __m256d acc = _mm256_setzero_pd();
      for (std::size_t p = 0; p < k; ++p) {
        acc = madd(acc, _mm256_broadcast_sd(arow + p), _mm256_loadu_pd(b + p * n + j));
      }
      _mm256_storeu_pd(crow + j, acc);
    }
    for (; j < n; ++j) {
      double sum = 0.0;
      for (std::size_t p = 0; p < k; ++p) sum += arow[p] * b[p * n + j];
      crow[j] = sum;
    }
  }
}

void adagrad(std::size_t n, double* theta, const double* grad, double* acc, double lr, double l2, double eps) {
  const __m256d vl2 = _mm256_set1_pd(l2);
  const __m256d vlr = _mm256_set1_pd(lr);
  const __m256d veps = _mm256_set1_pd(eps);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d th = _mm256_loadu_pd(theta + i);
    const __m256d g = madd(_mm256_loadu_pd(grad + i), vl2, th);
    const __m256d s = madd(_mm256_loadu_pd(acc + i), g, g);
    _mm256_storeu_pd(acc + i, s);
    const __m256d step = _mm256_div_pd(_mm256_mul_pd(vlr, g), _mm256_add_pd(_mm256_sqrt_pd(s), veps));
    _mm256_storeu_pd(theta + i, _mm256_sub_pd(th, step));
  }
  for (; i < n; ++i) {
    const double g = grad[i] + l2 * theta[i];
    acc[i] += g * g;
    theta[i] -= lr * g / (std::sqrt(acc[i]) + eps);
  }
}

constexpr KernelTable kAvx2{Backend::avx2, gemv, gemv_t_acc, ger_acc, axpy, gemm, adagrad};

}  // namespace

namespace detail {
const KernelTable* avx2_table() { return &kAvx2; }
}  // namespace detail

}  // namespace nnviz::kernels
