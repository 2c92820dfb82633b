#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

// Inner-loop kernels with a scalar reference and SIMD variants chosen at
// runtime. Every variant vectorizes across independent outputs and keeps each
// output's summation order, so all backends produce bit-identical results.
namespace nnviz::kernels {

enum class Backend { scalar, avx2, neon };

struct KernelTable {
  Backend backend;
  // y = A x, A row-major rows x cols.
  void (*gemv)(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y);
  // y += A^T x, x has `rows` entries, y has `cols`.
  void (*gemv_t_acc)(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y);
  // A += u v^T.
  void (*ger_acc)(double* a, std::size_t rows, std::size_t cols, const double* u, const double* v);
  // y += alpha x.
  void (*axpy)(std::size_t n, double alpha, const double* x, double* y);
  // C = A B, A is m x k, B is k x n.
  void (*gemm)(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n);
  // g' = g + l2*theta; acc += g'^2; theta -= lr * g' / (sqrt(acc) + eps).
  void (*adagrad)(std::size_t n, double* theta, const double* grad, double* acc, double lr, double l2,
                  double eps);
};

const KernelTable& scalar_table();

// True when the backend is compiled in and the running CPU supports it.
bool available(Backend backend);
// Throws ParameterError if unavailable.
const KernelTable& table(Backend backend);

Backend best_available();

// The table used by linalg. Initialized from NNVIZ_KERNELS (scalar|avx2|neon|auto)
// or best_available().
const KernelTable& active();
void select(Backend backend);

std::string_view name(Backend backend);
std::optional<Backend> parse_backend(std::string_view text);

namespace detail {
const KernelTable* avx2_table();
const KernelTable* neon_table();
}  // namespace detail

}  // namespace nnviz::kernels
