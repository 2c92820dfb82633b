#include "nnviz/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "nnviz/errors.hpp"
#include "nnviz/kernels.hpp"

namespace nnviz {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw DimensionError("matrix data length " + std::to_string(data_.size()) + " does not match shape " +
                         shape_string());
  }
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) : rows_(rows.size()) {
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw DimensionError("ragged matrix initializer");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

void Matrix::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

std::string Matrix::shape_string() const { return std::to_string(rows_) + "x" + std::to_string(cols_); }

namespace {

constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

Rng::Rng(std::uint64_t seed) : seed_(seed), key_(mix64(seed ^ 0x6A09E667F3BCC909ULL)) {}

std::uint64_t Rng::next_u64() {
  ++counter_;
  return mix64(key_ + counter_ * kGamma);
}

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) throw ParameterError("Rng::below requires n > 0");
  // Rejection sampling on the top of the range keeps the result unbiased.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t draw;
  do {
    draw = next_u64();
  } while (draw >= limit);
  return draw % n;
}

double Rng::normal() {
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Rng Rng::split(std::uint64_t tag) const { return Rng(seed_, mix64(key_ ^ mix64(tag + kGamma))); }

std::string to_string(Activation kind) {
  switch (kind) {
    case Activation::tanh:
      return "tanh";
    case Activation::sigmoid:
      return "sigmoid";
    case Activation::identity:
      return "identity";
  }
  return "unknown";
}

Activation parse_activation(const std::string& name) {
  if (name == "tanh") return Activation::tanh;
  if (name == "sigmoid") return Activation::sigmoid;
  if (name == "identity") return Activation::identity;
  throw ParameterError("unknown activation '" + name + "'");
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double activate(Activation kind, double x) {
  switch (kind) {
    case Activation::tanh:
      return std::tanh(x);
    case Activation::sigmoid:
      return sigmoid(x);
    case Activation::identity:
      return x;
  }
  return x;
}

double activation_slope(Activation kind, double y) {
  switch (kind) {
    case Activation::tanh:
      return 1.0 - y * y;
    case Activation::sigmoid:
      return y * (1.0 - y);
    case Activation::identity:
      return 1.0;
  }
  return 1.0;
}

Vector apply_activation(Activation kind, const Vector& x) {
  Vector out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = activate(kind, x[i]);
  return out;
}

Vector softmax(std::span<const double> x) {
  Vector out(x.size());
  if (x.empty()) return out;
  const double peak = *std::max_element(x.begin(), x.end());
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = std::exp(x[i] - peak);
    total += out[i];
  }
  for (double& v : out) v /= total;
  return out;
}

double log_sum_exp(std::span<const double> x) {
  if (x.empty()) return -std::numeric_limits<double>::infinity();
  const double peak = *std::max_element(x.begin(), x.end());
  double total = 0.0;
  for (double v : x) total += std::exp(v - peak);
  return peak + std::log(total);
}

std::size_t argmax(std::span<const double> x) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < x.size(); ++i) {
    if (x[i] > x[best]) best = i;
  }
  return best;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: inner dimensions disagree for " + a.shape_string() + " x " + b.shape_string());
  }
  Matrix c(a.rows(), b.cols());
  kernels::active().gemm(a.data(), b.data(), c.data(), a.rows(), a.cols(), b.cols());
  return c;
}

void matvec(const Matrix& a, std::span<const double> x, std::span<double> y) {
  if (x.size() != a.cols() || y.size() != a.rows()) {
    throw DimensionError("matvec: " + a.shape_string() + " with x[" + std::to_string(x.size()) + "] -> y[" +
                         std::to_string(y.size()) + "]");
  }
  kernels::active().gemv(a.data(), a.rows(), a.cols(), x.data(), y.data());
}

Vector matvec(const Matrix& a, std::span<const double> x) {
  Vector y(a.rows());
  matvec(a, x, y.span());
  return y;
}

void matvec_transposed_acc(const Matrix& a, std::span<const double> x, std::span<double> y) {
  if (x.size() != a.rows() || y.size() != a.cols()) {
    throw DimensionError("matvec_transposed: " + a.shape_string() + "^T with x[" + std::to_string(x.size()) +
                         "] -> y[" + std::to_string(y.size()) + "]");
  }
  kernels::active().gemv_t_acc(a.data(), a.rows(), a.cols(), x.data(), y.data());
}

void outer_acc(Matrix& a, std::span<const double> u, std::span<const double> v) {
  if (u.size() != a.rows() || v.size() != a.cols()) {
    throw DimensionError("outer_acc: " + a.shape_string() + " += u[" + std::to_string(u.size()) + "] v[" +
                         std::to_string(v.size()) + "]^T");
  }
  kernels::active().ger_acc(a.data(), a.rows(), a.cols(), u.data(), v.data());
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  if (x.size() != y.size()) {
    throw DimensionError("axpy: length " + std::to_string(x.size()) + " vs " + std::to_string(y.size()));
  }
  kernels::active().axpy(x.size(), alpha, x.data(), y.data());
}

Matrix transpose(const Matrix& a) {
  Matrix t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

Matrix init_uniform(std::size_t rows, std::size_t cols, double scale, Rng& rng) {
  if (!(scale > 0.0)) throw ParameterError("init_uniform: scale must be positive, got " + std::to_string(scale));
  Matrix m(rows, cols);
  for (double& v : m.span()) v = rng.uniform(-scale, scale);
  return m;
}

bool all_finite(std::span<const double> x) {
  return std::all_of(x.begin(), x.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace nnviz
