#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "nnviz/linalg.hpp"

namespace nnviz {

struct GradCheckReport {
  std::size_t checked = 0;
  std::size_t total = 0;  // coordinates eligible before sampling
  double max_relative_error = 0.0;
  std::string worst_coordinate;
  double tolerance = 0.0;
  bool passed = true;
};

// A tensor whose entries are perturbed in place and the analytic gradient for it.
// `rows`, when non-empty, restricts probing to those rows.
struct ProbeTensor {
  std::string name;
  Matrix* values;
  const Matrix* analytic;
  std::vector<std::size_t> rows;
};

// |a - n| / max(|a|, |n|, 1e-8)
double relative_error(double analytic, double numeric);

// Central differences (f(x+eps) - f(x-eps)) / (2 eps) against the analytic values.
// Probes every eligible coordinate when there are fewer than `max_coordinates`,
// otherwise a seeded sample of that many. epsilon must lie in [1e-7, 1e-3].
GradCheckReport finite_difference_check(std::span<const ProbeTensor> tensors, const std::function<double()>& objective,
                                        double epsilon, double tolerance, std::uint64_t sample_seed,
                                        std::size_t max_coordinates = 500);

}  // namespace nnviz
