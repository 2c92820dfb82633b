// AArch64 variant. Two-lane float64 vectors, multiply and add kept separate so
// results match the scalar reference exactly.
#include <arm_neon.h>

#include <cmath>

#include "nnviz/kernels.hpp"

namespace nnviz::kernels {
namespace {

inline float64x2_t madd(float64x2_t acc, float64x2_t a, float64x2_t b) { return vaddq_f64(acc, vmulq_f64(a, b)); }

void gemv(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y) {
  std::size_t i = 0;
  for (; i + 2 <= rows; i += 2) {
    const double* p0 = a + i * cols;
    const double* p1 = p0 + cols;
    float64x2_t acc = vdupq_n_f64(0.0);
    std::size_t k = 0;
    for (; k + 2 <= cols; k += 2) {
      const float64x2_t r0 = vld1q_f64(p0 + k);
      const float64x2_t r1 = vld1q_f64(p1 + k);
      acc = madd(acc, vzip1q_f64(r0, r1), vdupq_n_f64(x[k]));
      acc = madd(acc, vzip2q_f64(r0, r1), vdupq_n_f64(x[k + 1]));
    }
    for (; k < cols; ++k) {
      const double col[2] = {p0[k], p1[k]};
      acc = madd(acc, vld1q_f64(col), vdupq_n_f64(x[k]));
    }
    vst1q_f64(y + i, acc);
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
  for (; j + 2 <= cols; j += 2) {
    float64x2_t acc = vld1q_f64(y + j);
    for (std::size_t i = 0; i < rows; ++i) acc = madd(acc, vld1q_f64(a + i * cols + j), vdupq_n_f64(x[i]));
    vst1q_f64(y + j, acc);
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
    const float64x2_t ui = vdupq_n_f64(u[i]);
    std::size_t j = 0;
    for (; j + 2 <= cols; j += 2) vst1q_f64(row + j, madd(vld1q_f64(row + j), ui, vld1q_f64(v + j)));
    for (; j < cols; ++j) row[j] += u[i] * v[j];
  }
}

void axpy(std::size_t n, double alpha, const double* x, double* y) {
  const float64x2_t va = vdupq_n_f64(alpha);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(y + i, madd(vld1q_f64(y + i), va, vld1q_f64(x + i)));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void gemm(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    double* crow = c + i * n;
    std::size_t j = 0;
    for (; j + 2 <= n; j += 2) {
      float64x2_t acc = vdupq_n_f64(0.0);
      for (std::size_t p = 0; p < k; ++p) acc = madd(acc, vdupq_n_f64(arow[p]), vld1q_f64(b + p * n + j));
      vst1q_f64(crow + j, acc);
    }
    for (; j < n; ++j) {
      double sum = 0.0;
      for (std::size_t p = 0; p < k; ++p) sum += arow[p] * b[p * n + j];
      crow[j] = sum;
    }
  }
}

void adagrad(std::size_t n, double* theta, const double* grad, double* acc, double lr, double l2, double eps) {
  const float64x2_t vl2 = vdupq_n_f64(l2);
  const float64x2_t vlr = vdupq_n_f64(lr);
  const float64x2_t veps = vdupq_n_f64(eps);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t th = vld1q_f64(theta + i);
    const float64x2_t g = madd(vld1q_f64(grad + i), vl2, th);
    const float64x2_t s = madd(vld1q_f64(acc + i), g, g);
    vst1q_f64(acc + i, s);
    const float64x2_t step = vdivq_f64(vmulq_f64(vlr, g), vaddq_f64(vsqrtq_f64(s), veps));
    vst1q_f64(theta + i, vsubq_f64(th, step));
  }
  for (; i < n; ++i) {
    const double g = grad[i] + l2 * theta[i];
    acc[i] += g * g;
    theta[i] -= lr * g / (std::sqrt(acc[i]) + eps);
  }
}

constexpr KernelTable kNeon{Backend::neon, gemv, gemv_t_acc, ger_acc, axpy, gemm, adagrad};

}  // namespace

namespace detail {
const KernelTable* neon_table() { return &kNeon; }
}  // namespace detail

}  // namespace nnviz::kernels
