#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "nnviz/corpus.hpp"
#include "nnviz/gradcheck.hpp"
#include "nnviz/linalg.hpp"
#include "nnviz/models.hpp"
#include "nnviz/optim.hpp"

namespace nnviz::seq2seq {

using corpus::TokenId;
using models::LstmState;

struct Seq2SeqSpec {
  std::size_t vocab_size = 0;
  std::size_t embed_dim = 32;
  std::size_t hidden_dim = 64;
  models::LstmOutput lstm_output = models::LstmOutput::tanh_cell;

  void validate() const;
  friend bool operator==(const Seq2SeqSpec&, const Seq2SeqSpec&) = default;
};

// Tensor slots, in storage order.
enum Slot : std::size_t {
  kEncInput,
  kEncRecurrent,
  kEncBias,
  kDecInput,
  kDecRecurrent,
  kDecBias,
  kOutWeight,  // V x H
  kOutBias,    // V x 1
  kSlotCount
};

std::vector<models::TensorShape> seq2seq_layout(const Seq2SeqSpec& spec);

// One embedding table shared by encoder inputs and decoder inputs.
struct Seq2SeqParams {
  Seq2SeqSpec spec;
  Matrix embedding;  // V x D
  std::vector<Matrix> weights;

  void validate() const;
  models::LstmWeights encoder() const;
  models::LstmWeights decoder() const;

  friend bool operator==(const Seq2SeqParams&, const Seq2SeqParams&) = default;
};

Seq2SeqParams zero_seq2seq(const Seq2SeqSpec& spec);
Seq2SeqParams random_seq2seq(const Seq2SeqSpec& spec, double scale, Rng& rng);

struct EncodeResult {
  Matrix inputs;  // Ts x D
  models::LstmTrace trace;
  LstmState state() const { return trace.final_state(); }
};

EncodeResult encode_trace(const Seq2SeqParams& params, std::span<const TokenId> source);
LstmState encode(const Seq2SeqParams& params, std::span<const TokenId> source);

struct DecodeTrace {
  Matrix inputs;  // n x D, embeddings of y_0 .. y_{n-1}
  models::LstmTrace decoder;
  Matrix logits;         // n x V
  Matrix distributions;  // n x V
  std::vector<TokenId> emitted;  // per-step argmax
  Vector log_probs;              // ln p(y_t) of the gold token at each step

  std::size_t steps() const noexcept { return emitted.size(); }
};

struct TeacherForced {
  DecodeTrace trace;
  double loss = 0.0;  // mean of -ln p(y_t)
};

// `target` is <bos> y_1 .. y_m <eos>; the decoder makes n = target.size() - 1 predictions.
TeacherForced decode_teacher_forced(const Seq2SeqParams& params, const LstmState& enc_state,
                                    std::span<const TokenId> target);

// Argmax per step (ties to the lowest id) until <eos> or max_len steps.
// The returned ids exclude <eos>.
std::vector<TokenId> greedy_decode(const Seq2SeqParams& params, const LstmState& enc_state, std::size_t max_len);

// <bos> ids <eos>
std::vector<TokenId> autoencoder_target(std::span<const TokenId> source);

struct Seq2SeqGradients {
  Matrix embedding;  // V x D; only `touched_rows` are meaningful
  std::vector<TokenId> touched_rows;
  std::vector<Matrix> weights;
  Matrix d_source;  // Ts x D
  Matrix d_target;  // n x D, w.r.t. the decoder input embeddings
};

// Gradient of J = sum_t step_weights[t] * ln p(y_t) under teacher forcing.
Seq2SeqGradients seq2seq_backward(const Seq2SeqParams& params, std::span<const TokenId> source,
                                  std::span<const TokenId> target, std::span<const double> step_weights);

// Teacher-forced loss and its gradient.
double loss_gradient(const Seq2SeqParams& params, std::span<const TokenId> source, std::span<const TokenId> target,
                     Seq2SeqGradients& out);

GradCheckReport check_seq2seq_gradients(const Seq2SeqParams& params, std::span<const TokenId> source,
                                        std::span<const TokenId> target, double epsilon, double tolerance,
                                        std::uint64_t sample_seed = 0);

struct StepSaliency {
  std::size_t step = 0;          // 1-based prediction index
  std::size_t source_length = 0; // rows [0, source_length) are source tokens
  std::vector<std::string> tokens;
  Matrix gradient;  // (Ts + step) x D, d ln p(y_t) / d e
  Matrix grid;      // |gradient|
  Vector scores;    // mean_abs per token
  double log_prob = 0.0;

  // Share of the total score carried by source tokens (0 when all scores are 0).
  double source_mass_fraction() const;
};

// Saliency of ln p(y_step) w.r.t. every source embedding and the `step`
// preceding decoder inputs (<bos> y_1 .. y_{step-1}).
StepSaliency decode_step_saliency(const Seq2SeqParams& params, std::span<const TokenId> source,
                                  std::span<const TokenId> target, std::size_t step,
                                  const corpus::Vocab* vocab = nullptr);

struct Seq2SeqReport {
  std::vector<double> epoch_loss;
  std::vector<double> epoch_seconds;  // not part of equality

  friend bool operator==(const Seq2SeqReport& a, const Seq2SeqReport& b) { return a.epoch_loss == b.epoch_loss; }
};

struct Seq2SeqResult {
  Seq2SeqParams params;
  Seq2SeqReport report;
};

// AdaGrad on the mean teacher-forced loss of autoencoding each sentence.
// Uses learning_rate, l2_penalty, batch_size, max_epochs, embed_dim,
// hidden_dim, seed, adagrad_epsilon, clip, lstm_output and init_scale.
// `initial`, when given, replaces the seeded initialization.
Seq2SeqResult train_seq2seq(const optim::TrainConfig& cfg, const std::vector<std::vector<TokenId>>& sentences,
                            std::size_t vocab_size, const Seq2SeqParams* initial = nullptr);

// Fraction of positions where the greedy reconstruction matches the source
// (missing or extra positions count as misses against the longer length).
double reconstruction_accuracy(const Seq2SeqParams& params, const std::vector<std::vector<TokenId>>& sentences,
                               std::size_t max_len_slack = 5);

// Spearman rank correlation with average ranks for ties; 0 when either side is constant.
double spearman(std::span<const double> x, std::span<const double> y);

}  // namespace nnviz::seq2seq
