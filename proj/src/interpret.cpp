#include "nnviz/interpret.hpp"

#include <cmath>

#include "nnviz/errors.hpp"

namespace nnviz::interpret {

std::string to_string(TargetKind kind) {
  switch (kind) {
    case TargetKind::gold_logit:
      return "gold-logit";
    case TargetKind::pred_logit:
      return "pred-logit";
    case TargetKind::loss:
      return "loss";
  }
  return "?";
}

TargetKind parse_target_kind(const std::string& name) {
  if (name == "gold-logit") return TargetKind::gold_logit;
  if (name == "pred-logit") return TargetKind::pred_logit;
  if (name == "loss") return TargetKind::loss;
  throw ParameterError("unknown target '" + name + "' (expected gold-logit, pred-logit or loss)");
}

Objective resolve_target(TargetKind kind, const ModelParams& params, std::span<const TokenId> tokens,
                         std::optional<std::size_t> gold) {
  if (kind == TargetKind::pred_logit) return Objective::logit(models::classify(models::forward(params, tokens)).label);
  if (!gold) throw ParameterError("target " + to_string(kind) + " needs a gold label");
  if (*gold >= params.spec.num_classes) throw ParameterError("gold label outside the model's classes");
  return kind == TargetKind::loss ? Objective::cross_entropy(*gold) : Objective::logit(*gold);
}

std::string describe(Objective objective) {
  return (objective.kind == Objective::Kind::loss ? "loss:" : "logit:") + std::to_string(objective.index);
}

Matrix embed(const ModelParams& params, std::span<const TokenId> tokens) {
  if (tokens.empty()) throw DataError("input is empty");
  Matrix out(tokens.size(), params.embedding.cols());
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    if (tokens[t] >= params.embedding.rows()) throw DataError("token id " + std::to_string(tokens[t]) + " out of range");
    const auto row = params.embedding.row(tokens[t]);
    std::copy(row.begin(), row.end(), out.row(t).begin());
  }
  return out;
}

SaliencyMap embedding_saliency(const ModelParams& params, const Matrix& embedded, Objective target,
                               const std::vector<std::string>& surface) {
  if (target.index >= params.spec.num_classes) {
    throw ParameterError("target class " + std::to_string(target.index) + " >= num_classes");
  }
  if (!surface.empty() && surface.size() != embedded.rows()) {
    throw DimensionError("saliency: " + std::to_string(surface.size()) + " token names for " +
                         std::to_string(embedded.rows()) + " rows");
  }
  const models::ForwardTrace trace = models::forward_embedded(params, embedded);
  const models::Gradients grads = models::backward(params, trace, target);

  SaliencyMap map;
  map.tokens = surface;
  if (map.tokens.empty()) {
    for (std::size_t t = 0; t < embedded.rows(); ++t) map.tokens.push_back("#" + std::to_string(t));
  }
  map.gradient = grads.inputs;
  map.grid = Matrix(map.gradient.rows(), map.gradient.cols());
  double dot = 0.0;
  for (std::size_t i = 0; i < map.grid.size(); ++i) {
    map.grid.data()[i] = std::abs(map.gradient.data()[i]);
    dot += map.gradient.data()[i] * embedded.data()[i];
  }
  map.target = target;
  map.score = models::objective_value(trace, target);
  map.taylor_intercept = map.score - dot;
  return map;
}

SaliencyMap embedding_saliency(const ModelParams& params, std::span<const TokenId> tokens, Objective target,
                               const std::vector<std::string>& surface) {
  return embedding_saliency(params, embed(params, tokens), target, surface);
}

std::string to_string(Aggregation mode) { return mode == Aggregation::mean_abs ? "mean_abs" : "l2"; }

Aggregation parse_aggregation(const std::string& name) {
  if (name == "mean_abs") return Aggregation::mean_abs;
  if (name == "l2") return Aggregation::l2;
  throw ParameterError("unknown aggregation '" + name + "' (expected mean_abs or l2)");
}

Vector aggregate_rows(const Matrix& grid, Aggregation mode) {
  Vector out(grid.rows());
  for (std::size_t t = 0; t < grid.rows(); ++t) {
    double acc = 0.0;
    for (double v : grid.row(t)) acc += mode == Aggregation::mean_abs ? std::abs(v) : v * v;
    out[t] = mode == Aggregation::mean_abs ? (grid.cols() ? acc / static_cast<double>(grid.cols()) : 0.0)
                                           : std::sqrt(acc);
  }
  return out;
}

TokenScores aggregate_saliency(const SaliencyMap& map, Aggregation mode) {
  return {map.tokens, aggregate_rows(map.grid, mode), mode};
}

Matrix variance_salience(const Matrix& embedded) {
  if (embedded.rows() == 0) throw DataError("input is empty");
  const std::size_t n = embedded.rows();
  const std::size_t d = embedded.cols();
  Vector mean(d);
  for (std::size_t i = 0; i < n; ++i) axpy(1.0, embedded.row(i), mean.span());
  for (double& m : mean) m /= static_cast<double>(n);
  Matrix out(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      const double dev = embedded(i, j) - mean[j];
      out(i, j) = dev * dev;
    }
  }
  return out;
}

Matrix variance_salience(const ModelParams& params, std::span<const TokenId> tokens) {
  return variance_salience(embed(params, tokens));
}

}  // namespace nnviz::interpret
