#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace nnviz {

// Dense vector of doubles.
class Vector {
 public:
  Vector() = default;
  explicit Vector(std::size_t n, double fill = 0.0) : data_(n, fill) {}
  Vector(std::initializer_list<double> values) : data_(values) {}
  explicit Vector(std::vector<double> values) : data_(std::move(values)) {}
  explicit Vector(std::span<const double> values) : data_(values.begin(), values.end()) {}

  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }
  std::span<double> span() noexcept { return data_; }
  std::span<const double> span() const noexcept { return data_; }
  operator std::span<const double>() const noexcept { return data_; }

  auto begin() noexcept { return data_.begin(); }
  auto end() noexcept { return data_.end(); }
  auto begin() const noexcept { return data_.begin(); }
  auto end() const noexcept { return data_.end(); }

  const std::vector<double>& values() const noexcept { return data_; }

  friend bool operator==(const Vector&, const Vector&) = default;

 private:
  std::vector<double> data_;
};

// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  // Nested initializer: {{1, 2}, {3, 4}}. Rows must have equal length.
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }
  std::span<double> span() noexcept { return data_; }
  std::span<const double> span() const noexcept { return data_; }

  void fill(double value);
  std::string shape_string() const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Counter-based generator: the n-th draw is a pure function of (key, n), so
// streams are identical on every platform and children can be split off by tag
// without consuming the parent.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();
  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi);
  // Unbiased integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);
  double normal();

  // Independent stream derived from this generator's key and `tag`.
  Rng split(std::uint64_t tag) const;

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t counter() const noexcept { return counter_; }

 private:
  Rng(std::uint64_t seed, std::uint64_t key) : seed_(seed), key_(key) {}

  std::uint64_t seed_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

enum class Activation { tanh, sigmoid, identity };

std::string to_string(Activation kind);
Activation parse_activation(const std::string& name);

double activate(Activation kind, double x);
// Derivative expressed through the activation's output y = f(x).
double activation_slope(Activation kind, double y);
Vector apply_activation(Activation kind, const Vector& x);

double sigmoid(double x);

Vector softmax(std::span<const double> x);
double log_sum_exp(std::span<const double> x);
// Index of the largest entry; ties go to the lowest index.
std::size_t argmax(std::span<const double> x);

// C = A * B with ascending-k summation for every entry.
Matrix matmul(const Matrix& a, const Matrix& b);
// y = A x.
void matvec(const Matrix& a, std::span<const double> x, std::span<double> y);
Vector matvec(const Matrix& a, std::span<const double> x);
// y += A^T x.
void matvec_transposed_acc(const Matrix& a, std::span<const double> x, std::span<double> y);
// A += u v^T.
void outer_acc(Matrix& a, std::span<const double> u, std::span<const double> v);
// y += alpha x.
void axpy(double alpha, std::span<const double> x, std::span<double> y);

Matrix transpose(const Matrix& a);

Matrix init_uniform(std::size_t rows, std::size_t cols, double scale, Rng& rng);

bool all_finite(std::span<const double> x);

}  // namespace nnviz
