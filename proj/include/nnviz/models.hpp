#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nnviz/corpus.hpp"
#include "nnviz/gradcheck.hpp"
#include "nnviz/linalg.hpp"

namespace nnviz::models {

using corpus::TokenId;

enum class ArchKind { rnn, mlrnn, lstm, bilstm };

// How the LSTM exposes its cell: h = o * tanh(c) or h = o * c.
enum class LstmOutput { tanh_cell, raw_cell };

std::string to_string(ArchKind kind);
ArchKind parse_arch(const std::string& name);
std::string to_string(LstmOutput mode);
LstmOutput parse_lstm_output(const std::string& name);

struct ArchSpec {
  ArchKind kind = ArchKind::lstm;
  std::size_t layers = 1;  // > 1 only for mlrnn
  std::size_t embed_dim = 60;
  std::size_t hidden_dim = 60;
  std::size_t num_classes = 5;
  Activation activation = Activation::tanh;  // rnn / mlrnn composition function
  bool use_bias = true;
  LstmOutput lstm_output = LstmOutput::tanh_cell;

  // Width of the representation handed to the classifier (2H for bilstm).
  std::size_t output_dim() const noexcept;
  void validate() const;

  friend bool operator==(const ArchSpec&, const ArchSpec&) = default;
};

struct TensorShape {
  std::string name;
  std::size_t rows;
  std::size_t cols;
};

// Names and shapes of every non-embedding tensor, in storage order.
// LSTM gate blocks are stacked row-wise in the order input, forget, output, candidate.
std::vector<TensorShape> weight_layout(const ArchSpec& spec);

struct ModelParams {
  ArchSpec spec;
  Matrix embedding;             // |V| x D
  std::vector<Matrix> weights;  // ordered as weight_layout(spec)

  std::size_t vocab_size() const noexcept { return embedding.rows(); }
  // Throws DimensionError if any tensor disagrees with the spec.
  void validate() const;

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

ModelParams zero_params(const ArchSpec& spec, std::size_t vocab_size);
ModelParams random_params(const ArchSpec& spec, std::size_t vocab_size, double scale, Rng& rng);

// Index lookups into ModelParams::weights / Gradients::weights.
struct RecurrentSlots {
  std::size_t input;
  std::size_t recurrent;
  std::optional<std::size_t> bias;
};

struct WeightIndex {
  std::vector<RecurrentSlots> rnn_layers;  // rnn / mlrnn
  std::vector<RecurrentSlots> lstm_dirs;   // lstm: {fwd}; bilstm: {fwd, bwd}
  std::size_t classifier_weight;
  std::size_t classifier_bias;
};

WeightIndex weight_index(const ArchSpec& spec);

// ---- LSTM building block (shared with seq2seq) ---------------------------------

struct LstmWeights {
  const Matrix& input;      // 4H x D
  const Matrix& recurrent;  // 4H x H
  const Matrix* bias;       // 4H x 1, optional
  LstmOutput output = LstmOutput::tanh_cell;

  std::size_t hidden_dim() const noexcept { return recurrent.cols(); }
};

struct LstmGradRefs {
  Matrix& input;
  Matrix& recurrent;
  Matrix* bias;
};

struct LstmState {
  Vector hidden;
  Vector cell;
};

// Cached activations of one LSTM pass; row t holds step t.
struct LstmTrace {
  Matrix gates;   // T x 4H after the nonlinearities (i, f, o, l)
  Matrix cells;   // T x H, c_t
  Matrix memory;  // T x H, m_t = tanh(c_t) or c_t
  Matrix hidden;  // T x H, h_t = o_t * m_t
  LstmState initial;

  std::size_t steps() const noexcept { return hidden.rows(); }
  LstmState final_state() const;
};

// One step; writes gate/cell/memory/hidden rows into the caller's buffers.
void lstm_step(const LstmWeights& w, std::span<const double> x, std::span<const double> h_prev,
               std::span<const double> c_prev, std::span<double> gates, std::span<double> cell,
               std::span<double> memory, std::span<double> hidden);

LstmTrace lstm_forward(const LstmWeights& w, const Matrix& inputs, const LstmState& initial);

struct LstmBackward {
  Matrix d_inputs;  // T x D
  LstmState d_initial;
};

// d_hidden holds the upstream gradient for every h_t; d_final_cell the upstream
// gradient for c_T (may be empty). Parameter gradients are accumulated into `grads`.
LstmBackward lstm_backward(const LstmWeights& w, LstmGradRefs grads, const LstmTrace& trace, const Matrix& inputs,
                           const Matrix& d_hidden, std::span<const double> d_final_cell);

// ---- Classifier ---------------------------------------------------------------

struct DropoutMasks {
  Matrix inputs;          // T x D, or empty for none
  Vector representation;  // output_dim, or empty for none
};

struct ForwardTrace {
  std::vector<TokenId> tokens;  // empty when run on explicit embeddings
  Matrix embedded;              // T x D, raw embedding rows
  Matrix inputs;                // T x D, as fed to the recurrence (after dropout)
  Matrix input_mask;            // empty when no dropout
  std::vector<Matrix> layer_states;  // rnn / mlrnn: per layer, T x H
  std::vector<LstmTrace> lstm;       // lstm: {fwd}; bilstm: {fwd, bwd over reversed input}
  Vector representation;             // r
  Vector representation_mask;        // empty when no dropout
  Vector classifier_input;           // r after dropout
  Vector logits;
  Vector probabilities;

  std::size_t steps() const noexcept { return inputs.rows(); }
};

ForwardTrace forward(const ModelParams& params, std::span<const TokenId> tokens,
                     const DropoutMasks* masks = nullptr);
// Same model on caller-provided embedding vectors (one row per step).
ForwardTrace forward_embedded(const ModelParams& params, const Matrix& embedded,
                              const DropoutMasks* masks = nullptr);

// Scalar being differentiated: the raw logit of class c, or cross-entropy -ln p_g.
struct Objective {
  enum class Kind { class_logit, loss };
  Kind kind = Kind::class_logit;
  std::size_t index = 0;

  static Objective logit(std::size_t c) { return {Kind::class_logit, c}; }
  static Objective cross_entropy(std::size_t gold) { return {Kind::loss, gold}; }
};

double objective_value(const ForwardTrace& trace, Objective objective);

struct Gradients {
  std::vector<Matrix> weights;  // congruent with ModelParams::weights
  std::vector<TokenId> tokens;
  Matrix inputs;                // T x D, d objective / d e_t (raw embedding rows)
};

Gradients zero_gradients(const ModelParams& params);

Gradients backward(const ModelParams& params, const ForwardTrace& trace, Objective objective);

// Scatter-adds input gradients into a |V| x D embedding gradient.
void accumulate_embedding_gradient(const Gradients& grads, Matrix& embedding_grad);

struct Prediction {
  std::size_t label;
  Vector probabilities;
};

// Argmax of the class distribution, ties to the lowest index.
Prediction classify(const ForwardTrace& trace);

using GradientFn = std::function<Gradients(const ModelParams&, const ForwardTrace&, Objective)>;

// Compares `gradient_fn` (default: backward) against central differences over every
// weight coordinate and the embedding rows referenced by `tokens`; samples 500
// coordinates when there are more.
GradCheckReport check_gradients(const ModelParams& params, std::span<const TokenId> tokens, Objective objective,
                                double epsilon, double tolerance, const GradientFn& gradient_fn = {},
                                std::uint64_t sample_seed = 0);

}  // namespace nnviz::models
