#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "nnviz/corpus.hpp"
#include "nnviz/linalg.hpp"
#include "nnviz/models.hpp"

namespace nnviz::optim {

using corpus::PhraseExample;
using models::ArchSpec;
using models::ModelParams;

enum class EvalTask { fine, coarse };

std::string to_string(EvalTask task);
EvalTask parse_eval_task(const std::string& name);

struct TrainConfig {
  double learning_rate = 0.05;
  double l2_penalty = 1e-5;
  std::size_t batch_size = 32;
  std::size_t max_epochs = 30;
  double dropout_rate = 0.1;
  std::size_t embed_dim = 60;
  std::size_t hidden_dim = 60;
  std::uint64_t seed = 1;
  EvalTask eval_task = EvalTask::fine;
  double adagrad_epsilon = 1e-8;
  std::optional<double> clip;  // element-wise bound on the batch gradient

  // Architecture knobs that the training command also needs.
  std::size_t layers = 1;
  int min_count = 1;
  models::LstmOutput lstm_output = models::LstmOutput::tanh_cell;
  bool use_bias = true;
  double init_scale = 0.1;

  void validate() const;
  // Copies dims, layers, bias and output mode into `spec`.
  ArchSpec apply_to(ArchSpec spec) const;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

// Flat key=value lines; '#' starts a comment. Unknown keys and malformed lines
// throw ParseError with the byte offset of the line.
TrainConfig parse_config(std::string_view text, TrainConfig base = {});
TrainConfig load_config(const std::string& path, TrainConfig base = {});
std::string serialize_config(const TrainConfig& cfg);

// Squared-gradient sums, congruent with ModelParams.
struct AdagradState {
  Matrix embedding;
  std::vector<Matrix> weights;

  friend bool operator==(const AdagradState&, const AdagradState&) = default;
};

AdagradState make_adagrad_state(const ModelParams& params);

// Batch gradient in parameter layout. Only `touched_rows` of `embedding`
// are read and only those embedding rows are updated.
struct ParamGradients {
  Matrix embedding;
  std::vector<std::size_t> touched_rows;  // ascending, unique
  std::vector<Matrix> weights;
};

ParamGradients zero_param_gradients(const ModelParams& params);

// g' = g + l2 * theta;  acc += g'^2;  theta -= lr * g' / (sqrt(acc) + eps)
void adagrad_update(Matrix& theta, const Matrix& grad, Matrix& acc, double learning_rate, double l2, double epsilon);

// Applies the update to every weight tensor and to the touched embedding rows.
// Throws NumericError, leaving params and state untouched, on a non-finite gradient.
void adagrad_step(ModelParams& params, const ParamGradients& grads, AdagradState& state, const TrainConfig& cfg);

// Inverted dropout: entries are 0 with probability `rate`, else 1/(1-rate).
Vector dropout_mask(std::size_t dim, double rate, Rng& rng);

struct EpochStats {
  double train_loss = 0.0;  // mean over examples
  double dev_accuracy = 0.0;
  double seconds = 0.0;     // wall clock, not part of equality
};

struct TrainReport {
  std::vector<EpochStats> epochs;
  std::optional<std::size_t> best_epoch;  // 0-based
  double best_dev_accuracy = 0.0;

  // Compares everything except wall-clock time.
  friend bool operator==(const TrainReport& a, const TrainReport& b);
};

struct TrainResult {
  ModelParams params;  // from the best dev epoch (initial params when no epoch ran)
  TrainReport report;
};

// Class index the model is trained against: the fine label for C = 5, the
// coarse label for C = 2 (neutral examples are skipped), otherwise the fine
// label when it fits.
std::optional<std::size_t> training_target(const PhraseExample& example, std::size_t num_classes);

// Mean cross-entropy over `batch` plus its gradient. With a non-null `dropout`
// generator each example draws its masks from dropout->split(position).
double batch_gradient(const ModelParams& params, std::span<const PhraseExample> examples,
                      std::span<const std::size_t> batch, double dropout_rate, const Rng* dropout,
                      ParamGradients& out);

TrainResult train_classifier(const ArchSpec& spec, const TrainConfig& cfg, std::span<const PhraseExample> train,
                             std::span<const PhraseExample> dev, std::size_t vocab_size);

// Predicted label for the task: argmax for fine; for coarse, the argmax of a
// two-class model or positive (3,4) versus negative (0,1) mass of a five-class one.
std::size_t predict(const ModelParams& params, std::span<const corpus::TokenId> tokens, EvalTask task);

// Fraction correct. Coarse skips neutral examples. Throws DataError when nothing is left to score.
double evaluate(const ModelParams& params, std::span<const PhraseExample> examples, EvalTask task);

}  // namespace nnviz::optim
