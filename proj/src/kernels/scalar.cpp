#include <cmath>

#include "nnviz/kernels.hpp"

namespace nnviz::kernels {
namespace {

void gemv(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y) {
  for (std::size_t i = 0; i < rows; ++i) {
    const double* row = a + i * cols;
    double sum = 0.0;
    for (std::size_t k = 0; k < cols; ++k) sum += row[k] * x[k];
    y[i] = sum;
  }
}

void gemv_t_acc(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y) {
  for (std::size_t i = 0; i < rows; ++i) {
    const double* row = a + i * cols;
    const double xi = x[i];
    for (std::size_t j = 0; j < cols; ++j) y[j] += row[j] * xi;
  }
}

void ger_acc(double* a, std::size_t rows, std::size_t cols, const double* u, const double* v) {
  for (std::size_t i = 0; i < rows; ++i) {
    double* row = a + i * cols;
    const double ui = u[i];
    for (std::size_t j = 0; j < cols; ++j) row[j] += ui * v[j];
  }
}

void axpy(std::size_t n, double alpha, const double* x, double* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void gemm(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double sum = 0.0;
      for (std::size_t p = 0; p < k; ++p) sum += a[i * k + p] * b[p * n + j];
      c[i * n + j] = sum;
    }
  }
}

void adagrad(std::size_t n, double* theta, const double* grad, double* acc, double lr, double l2, double eps) {
  for (std::size_t i = 0; i < n; ++i) {
    const double g = grad[i] + l2 * theta[i];
    acc[i] += g * g;
    theta[i] -= lr * g / (std::sqrt(acc[i]) + eps);
  }
}

constexpr KernelTable kScalar{Backend::scalar, gemv, gemv_t_acc, ger_acc, axpy, gemm, adagrad};

}  // namespace

const KernelTable& scalar_table() { return kScalar; }

}  // namespace nnviz::kernels
