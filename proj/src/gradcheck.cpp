#include "nnviz/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "nnviz/errors.hpp"

namespace nnviz {

double relative_error(double analytic, double numeric) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / scale;
}

GradCheckReport finite_difference_check(std::span<const ProbeTensor> tensors, const std::function<double()>& objective,
                                        double epsilon, double tolerance, std::uint64_t sample_seed,
                                        std::size_t max_coordinates) {
  if (!(epsilon >= 1e-7 && epsilon <= 1e-3)) {
    throw ParameterError("gradient check epsilon must lie in [1e-7, 1e-3]");
  }
  struct Coord {
    std::size_t tensor;
    std::size_t offset;
  };
  std::vector<Coord> coords;
  for (std::size_t t = 0; t < tensors.size(); ++t) {
    const ProbeTensor& probe = tensors[t];
    if (probe.values->rows() != probe.analytic->rows() || probe.values->cols() != probe.analytic->cols()) {
      throw DimensionError("gradient check: analytic gradient for '" + probe.name + "' has shape " +
                           probe.analytic->shape_string() + ", expected " + probe.values->shape_string());
    }
    const std::size_t cols = probe.values->cols();
    if (probe.rows.empty()) {
      for (std::size_t i = 0; i < probe.values->size(); ++i) coords.push_back({t, i});
    } else {
      for (std::size_t r : probe.rows)
        for (std::size_t c = 0; c < cols; ++c) coords.push_back({t, r * cols + c});
    }
  }

  GradCheckReport report;
  report.total = coords.size();
  report.tolerance = tolerance;
  if (coords.size() >= max_coordinates) {
    Rng rng(sample_seed);
    for (std::size_t i = 0; i < max_coordinates; ++i) {
      std::swap(coords[i], coords[i + rng.below(coords.size() - i)]);
    }
    coords.resize(max_coordinates);
  }

  for (const Coord& coord : coords) {
    const ProbeTensor& probe = tensors[coord.tensor];
    double& slot = probe.values->data()[coord.offset];
    const double original = slot;
    slot = original + epsilon;
    const double plus = objective();
    slot = original - epsilon;
    const double minus = objective();
    slot = original;
    const double numeric = (plus - minus) / (2.0 * epsilon);
    const double analytic = probe.analytic->data()[coord.offset];
    const double err = relative_error(analytic, numeric);
    ++report.checked;
    if (!(err <= report.max_relative_error)) {
      report.max_relative_error = err;
      const std::size_t cols = probe.values->cols();
      report.worst_coordinate = probe.name + "[" + std::to_string(coord.offset / cols) + "," +
                                std::to_string(coord.offset % cols) + "]";
    }
  }
  report.passed = report.max_relative_error <= tolerance;
  return report;
}

}  // namespace nnviz
