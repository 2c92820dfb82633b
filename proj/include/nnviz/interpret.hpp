#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nnviz/corpus.hpp"
#include "nnviz/linalg.hpp"
#include "nnviz/models.hpp"

namespace nnviz::interpret {

using corpus::TokenId;
using models::ModelParams;
using models::Objective;

// How the command line names the differentiated scalar.
enum class TargetKind { gold_logit, pred_logit, loss };

std::string to_string(TargetKind kind);
TargetKind parse_target_kind(const std::string& name);

// gold_logit and loss need a gold class; pred_logit uses the model's argmax.
Objective resolve_target(TargetKind kind, const ModelParams& params, std::span<const TokenId> tokens,
                         std::optional<std::size_t> gold);

// "logit:3" or "loss:1".
std::string describe(Objective objective);

struct SaliencyMap {
  std::vector<std::string> tokens;
  Matrix gradient;  // T x D, signed d target / d e
  Matrix grid;      // T x D, |gradient|
  Objective target;
  double score = 0.0;             // target value at the input
  double taylor_intercept = 0.0;  // score - <gradient, E>
};

// Gradient of the target at the embedding inputs through the frozen model
// (no dropout). `surface` names the tokens; when empty, ids are printed.
SaliencyMap embedding_saliency(const ModelParams& params, std::span<const TokenId> tokens, Objective target,
                               const std::vector<std::string>& surface = {});

// Same, on explicit embedding rows.
SaliencyMap embedding_saliency(const ModelParams& params, const Matrix& embedded, Objective target,
                               const std::vector<std::string>& surface = {});

enum class Aggregation { mean_abs, l2 };

std::string to_string(Aggregation mode);
Aggregation parse_aggregation(const std::string& name);

struct TokenScores {
  std::vector<std::string> tokens;
  Vector scores;
  Aggregation mode = Aggregation::mean_abs;
};

Vector aggregate_rows(const Matrix& grid, Aggregation mode);
TokenScores aggregate_saliency(const SaliencyMap& map, Aggregation mode);

// out(i, j) = (e_ij - mean_j)^2 with mean_j the sentence average of dimension j.
Matrix variance_salience(const Matrix& embedded);
Matrix variance_salience(const ModelParams& params, std::span<const TokenId> tokens);

// Embedding rows for `tokens`; DataError on an empty input or unknown id.
Matrix embed(const ModelParams& params, std::span<const TokenId> tokens);

}  // namespace nnviz::interpret
