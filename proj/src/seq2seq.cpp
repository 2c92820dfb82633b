#include "nnviz/seq2seq.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <set>

#include "nnviz/errors.hpp"
#include "nnviz/interpret.hpp"
#include "nnviz/kernels.hpp"
#include "nnviz/parallel.hpp"

namespace nnviz::seq2seq {

using corpus::kBos;
using corpus::kEos;

void Seq2SeqSpec::validate() const {
  if (vocab_size <= kEos) throw ParameterError("seq2seq vocabulary must include the reserved tokens");
  if (embed_dim < 1 || hidden_dim < 1) throw ParameterError("seq2seq dims must be >= 1");
}

std::vector<models::TensorShape> seq2seq_layout(const Seq2SeqSpec& s) {
  const std::size_t d = s.embed_dim, h = s.hidden_dim, v = s.vocab_size;
  return {{"encoder.input", 4 * h, d},   {"encoder.recurrent", 4 * h, h}, {"encoder.bias", 4 * h, 1},
          {"decoder.input", 4 * h, d},   {"decoder.recurrent", 4 * h, h}, {"decoder.bias", 4 * h, 1},
          {"output.weight", v, h},       {"output.bias", v, 1}};
}

void Seq2SeqParams::validate() const {
  spec.validate();
  if (embedding.rows() != spec.vocab_size || embedding.cols() != spec.embed_dim) {
    throw DimensionError("seq2seq embedding is " + embedding.shape_string());
  }
  const auto layout = seq2seq_layout(spec);
  if (weights.size() != layout.size()) throw DimensionError("seq2seq tensor count mismatch");
  for (std::size_t i = 0; i < layout.size(); ++i) {
    if (weights[i].rows() != layout[i].rows || weights[i].cols() != layout[i].cols) {
      throw DimensionError(layout[i].name + " is " + weights[i].shape_string());
    }
  }
}

models::LstmWeights Seq2SeqParams::encoder() const {
  return {weights[kEncInput], weights[kEncRecurrent], &weights[kEncBias], spec.lstm_output};
}

models::LstmWeights Seq2SeqParams::decoder() const {
  return {weights[kDecInput], weights[kDecRecurrent], &weights[kDecBias], spec.lstm_output};
}

Seq2SeqParams zero_seq2seq(const Seq2SeqSpec& spec) {
  spec.validate();
  Seq2SeqParams p{spec, Matrix(spec.vocab_size, spec.embed_dim), {}};
  for (const auto& t : seq2seq_layout(spec)) p.weights.emplace_back(t.rows, t.cols);
  return p;
}

Seq2SeqParams random_seq2seq(const Seq2SeqSpec& spec, double scale, Rng& rng) {
  spec.validate();
  Seq2SeqParams p{spec, init_uniform(spec.vocab_size, spec.embed_dim, scale, rng), {}};
  for (const auto& t : seq2seq_layout(spec)) p.weights.push_back(init_uniform(t.rows, t.cols, scale, rng));
  return p;
}

namespace {

Matrix embed_rows(const Seq2SeqParams& params, std::span<const TokenId> ids) {
  Matrix out(ids.size(), params.spec.embed_dim);
  for (std::size_t t = 0; t < ids.size(); ++t) {
    if (ids[t] >= params.spec.vocab_size) throw DataError("token id " + std::to_string(ids[t]) + " out of range");
    const auto row = params.embedding.row(ids[t]);
    std::copy(row.begin(), row.end(), out.row(t).begin());
  }
  return out;
}

LstmState zero_state(std::size_t h) { return {Vector(h), Vector(h)}; }

void check_target(std::span<const TokenId> target) {
  if (target.size() < 2 || target.front() != kBos || target.back() != kEos) {
    throw DataError("decoder target must start with <bos> and end with <eos>");
  }
}

void project(const Seq2SeqParams& params, std::span<const double> hidden, std::span<double> logits) {
  matvec(params.weights[kOutWeight], hidden, logits);
  axpy(1.0, params.weights[kOutBias].span(), logits);
}

}  // namespace

EncodeResult encode_trace(const Seq2SeqParams& params, std::span<const TokenId> source) {
  if (source.empty()) throw DataError("source sequence is empty");
  EncodeResult r;
  r.inputs = embed_rows(params, source);
  r.trace = models::lstm_forward(params.encoder(), r.inputs, zero_state(params.spec.hidden_dim));
  return r;
}

LstmState encode(const Seq2SeqParams& params, std::span<const TokenId> source) {
  return encode_trace(params, source).state();
}

TeacherForced decode_teacher_forced(const Seq2SeqParams& params, const LstmState& enc_state,
                                    std::span<const TokenId> target) {
  check_target(target);
  const std::size_t n = target.size() - 1;
  const std::size_t v = params.spec.vocab_size;
  TeacherForced out;
  DecodeTrace& tr = out.trace;
  tr.inputs = embed_rows(params, target.first(n));
  for (std::size_t t = 1; t <= n; ++t) {
    if (target[t] >= v) throw DataError("token id " + std::to_string(target[t]) + " out of range");
  }
  tr.decoder = models::lstm_forward(params.decoder(), tr.inputs, enc_state);
  tr.logits = Matrix(n, v);
  tr.distributions = Matrix(n, v);
  tr.log_probs = Vector(n);
  double total = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    project(params, tr.decoder.hidden.row(t), tr.logits.row(t));
    const Vector p = softmax(tr.logits.row(t));
    std::copy(p.begin(), p.end(), tr.distributions.row(t).begin());
    tr.emitted.push_back(argmax(p.span()));
    tr.log_probs[t] = tr.logits(t, target[t + 1]) - log_sum_exp(tr.logits.row(t));
    total -= tr.log_probs[t];
  }
  out.loss = total / static_cast<double>(n);
  return out;
}

std::vector<TokenId> greedy_decode(const Seq2SeqParams& params, const LstmState& enc_state, std::size_t max_len) {
  if (max_len < 1) throw ParameterError("max_len must be >= 1");
  const std::size_t h = params.spec.hidden_dim;
  const auto w = params.decoder();
  Vector gates(4 * h), cell(h), memory(h), hidden(h);
  Vector h_prev = enc_state.hidden, c_prev = enc_state.cell;
  Vector logits(params.spec.vocab_size);
  std::vector<TokenId> out;
  TokenId input = kBos;
  for (std::size_t step = 0; step < max_len; ++step) {
    models::lstm_step(w, params.embedding.row(input), h_prev.span(), c_prev.span(), gates.span(), cell.span(),
                      memory.span(), hidden.span());
    project(params, hidden.span(), logits.span());
    const TokenId next = argmax(logits.span());
    if (next == kEos) break;
    out.push_back(next);
    input = next;
    h_prev = hidden;
    c_prev = cell;
  }
  return out;
}

std::vector<TokenId> autoencoder_target(std::span<const TokenId> source) {
  std::vector<TokenId> t;
  t.reserve(source.size() + 2);
  t.push_back(kBos);
  t.insert(t.end(), source.begin(), source.end());
  t.push_back(kEos);
  return t;
}

Seq2SeqGradients seq2seq_backward(const Seq2SeqParams& params, std::span<const TokenId> source,
                                  std::span<const TokenId> target, std::span<const double> step_weights) {
  const EncodeResult enc = encode_trace(params, source);
  const TeacherForced tf = decode_teacher_forced(params, enc.state(), target);
  const DecodeTrace& tr = tf.trace;
  const std::size_t n = tr.steps();
  const std::size_t h = params.spec.hidden_dim;
  const std::size_t v = params.spec.vocab_size;
  if (step_weights.size() != n) throw DimensionError("one step weight per prediction is required");

  Seq2SeqGradients g;
  g.embedding = Matrix(v, params.spec.embed_dim);
  for (const auto& w : params.weights) g.weights.emplace_back(w.rows(), w.cols());

  // d J / d logits_t = a_t (onehot(y_t) - p_t)
  Matrix d_hidden(n, h);
  Vector d_logits(v);
  for (std::size_t t = 0; t < n; ++t) {
    const double a = step_weights[t];
    if (a == 0.0) continue;
    for (std::size_t k = 0; k < v; ++k) d_logits[k] = -a * tr.distributions(t, k);
    d_logits[target[t + 1]] += a;
    outer_acc(g.weights[kOutWeight], d_logits.span(), tr.decoder.hidden.row(t));
    axpy(1.0, d_logits.span(), g.weights[kOutBias].span());
    matvec_transposed_acc(params.weights[kOutWeight], d_logits.span(), d_hidden.row(t));
  }
  const auto dec = models::lstm_backward(
      params.decoder(), {g.weights[kDecInput], g.weights[kDecRecurrent], &g.weights[kDecBias]}, tr.decoder, tr.inputs,
      d_hidden, {});
  Matrix d_enc_hidden(source.size(), h);
  std::copy(dec.d_initial.hidden.begin(), dec.d_initial.hidden.end(), d_enc_hidden.row(source.size() - 1).begin());
  const auto encb = models::lstm_backward(
      params.encoder(), {g.weights[kEncInput], g.weights[kEncRecurrent], &g.weights[kEncBias]}, enc.trace, enc.inputs,
      d_enc_hidden, dec.d_initial.cell.span());
  g.d_source = encb.d_inputs;
  g.d_target = dec.d_inputs;

  std::set<TokenId> touched;
  for (std::size_t t = 0; t < source.size(); ++t) {
    axpy(1.0, g.d_source.row(t), g.embedding.row(source[t]));
    touched.insert(source[t]);
  }
  for (std::size_t t = 0; t < n; ++t) {
    axpy(1.0, g.d_target.row(t), g.embedding.row(target[t]));
    touched.insert(target[t]);
  }
  g.touched_rows.assign(touched.begin(), touched.end());
  return g;
}

double loss_gradient(const Seq2SeqParams& params, std::span<const TokenId> source, std::span<const TokenId> target,
                     Seq2SeqGradients& out) {
  check_target(target);
  const std::size_t n = target.size() - 1;
  const std::vector<double> weights(n, -1.0 / static_cast<double>(n));
  out = seq2seq_backward(params, source, target, weights);
  return decode_teacher_forced(params, encode(params, source), target).loss;
}

GradCheckReport check_seq2seq_gradients(const Seq2SeqParams& params, std::span<const TokenId> source,
                                        std::span<const TokenId> target, double epsilon, double tolerance,
                                        std::uint64_t sample_seed) {
  Seq2SeqParams work = params;
  Seq2SeqGradients g;
  loss_gradient(work, source, target, g);
  const auto layout = seq2seq_layout(work.spec);
  std::vector<ProbeTensor> probes;
  probes.push_back({"embedding", &work.embedding, &g.embedding, g.touched_rows});
  for (std::size_t i = 0; i < work.weights.size(); ++i) {
    probes.push_back({layout[i].name, &work.weights[i], &g.weights[i], {}});
  }
  // The loss is O(1), so its last-bit rounding alone is ~1e-11 after dividing by 2 eps.
  // Re-derive it from the logits in extended precision and subtract the unperturbed
  // value, which keeps small gradient coordinates above the noise floor.
  auto precise = [&] {
    const DecodeTrace tr = decode_teacher_forced(work, encode(work, source), target).trace;
    const Matrix& w = work.weights[kOutWeight];
    const Matrix& b = work.weights[kOutBias];
    std::vector<long double> logits(w.rows());
    long double total = 0.0L;
    for (std::size_t t = 0; t < tr.steps(); ++t) {
      const auto h = tr.decoder.hidden.row(t);
      for (std::size_t v = 0; v < w.rows(); ++v) {
        long double z = b(v, 0);
        for (std::size_t k = 0; k < w.cols(); ++k) z += static_cast<long double>(w(v, k)) * h[k];
        logits[v] = z;
      }
      const long double mx = *std::max_element(logits.begin(), logits.end());
      long double z = 0.0L;
      for (long double v : logits) z += std::exp(v - mx);
      total -= logits[target[t + 1]] - mx - std::log(z);
    }
    return total / static_cast<long double>(tr.steps());
  };
  const long double base = precise();
  return finite_difference_check(
      probes, [&] { return static_cast<double>(precise() - base); }, epsilon, tolerance, sample_seed);
}

double StepSaliency::source_mass_fraction() const {
  double total = 0.0, src = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    total += scores[i];
    if (i < source_length) src += scores[i];
  }
  return total > 0.0 ? src / total : 0.0;
}

StepSaliency decode_step_saliency(const Seq2SeqParams& params, std::span<const TokenId> source,
                                  std::span<const TokenId> target, std::size_t step, const corpus::Vocab* vocab) {
  check_target(target);
  const std::size_t n = target.size() - 1;
  if (step < 1 || step > n) {
    throw ParameterError("decoding step " + std::to_string(step) + " outside [1, " + std::to_string(n) + "]");
  }
  std::vector<double> weights(n, 0.0);
  weights[step - 1] = 1.0;
  const Seq2SeqGradients g = seq2seq_backward(params, source, target, weights);

  StepSaliency s;
  s.step = step;
  s.source_length = source.size();
  s.gradient = Matrix(source.size() + step, params.spec.embed_dim);
  for (std::size_t t = 0; t < source.size(); ++t) {
    std::copy(g.d_source.row(t).begin(), g.d_source.row(t).end(), s.gradient.row(t).begin());
  }
  for (std::size_t t = 0; t < step; ++t) {
    std::copy(g.d_target.row(t).begin(), g.d_target.row(t).end(), s.gradient.row(source.size() + t).begin());
  }
  s.grid = Matrix(s.gradient.rows(), s.gradient.cols());
  for (std::size_t i = 0; i < s.grid.size(); ++i) s.grid.data()[i] = std::abs(s.gradient.data()[i]);
  s.scores = interpret::aggregate_rows(s.grid, interpret::Aggregation::mean_abs);
  auto name = [&](TokenId id) { return vocab ? vocab->token(id) : "#" + std::to_string(id); };
  for (TokenId id : source) s.tokens.push_back(name(id));
  for (std::size_t t = 0; t < step; ++t) s.tokens.push_back(name(target[t]));
  s.log_prob = decode_teacher_forced(params, encode(params, source), target).trace.log_probs[step - 1];
  return s;
}

Seq2SeqResult train_seq2seq(const optim::TrainConfig& cfg, const std::vector<std::vector<TokenId>>& sentences,
                            std::size_t vocab_size, const Seq2SeqParams* initial) {
  cfg.validate();
  if (sentences.empty()) throw DataError("seq2seq corpus is empty");
  for (const auto& s : sentences) {
    if (s.empty()) throw DataError("seq2seq corpus contains an empty sentence");
    for (auto id : s) {
      if (id >= vocab_size) throw DataError("token id " + std::to_string(id) + " outside vocabulary");
    }
  }
  const Seq2SeqSpec spec = initial ? initial->spec : Seq2SeqSpec{vocab_size, cfg.embed_dim, cfg.hidden_dim, cfg.lstm_output};
  const Rng root(cfg.seed);
  Rng init = root.split(1);
  Seq2SeqResult result{initial ? *initial : random_seq2seq(spec, cfg.init_scale, init), {}};
  if (initial) {
    initial->validate();
    if (initial->spec.vocab_size != vocab_size) throw DimensionError("initial seq2seq params have another vocabulary");
  }
  Seq2SeqParams& params = result.params;

  Matrix acc_embedding(params.embedding.rows(), params.embedding.cols());
  std::vector<Matrix> acc;
  for (const auto& w : params.weights) acc.emplace_back(w.rows(), w.cols());
  const Rng epoch_root = root.split(2);

  for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    Rng shuffle = epoch_root.split(epoch);
    const auto batches = corpus::make_batches(sentences.size(), cfg.batch_size, shuffle);
    double loss_sum = 0.0;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      const auto& batch = batches[b];
      std::vector<Seq2SeqGradients> parts(batch.size());
      std::vector<double> losses(batch.size());
      parallel_for(batch.size(), [&](std::size_t k) {
        const auto& src = sentences[batch[k]];
        losses[k] = loss_gradient(params, src, autoencoder_target(src), parts[k]);
      });
      const double scale = 1.0 / static_cast<double>(batch.size());
      std::vector<Matrix> grads;
      for (const auto& w : params.weights) grads.emplace_back(w.rows(), w.cols());
      Matrix grad_embedding(params.embedding.rows(), params.embedding.cols());
      std::vector<char> touched(vocab_size, 0);
      for (std::size_t k = 0; k < batch.size(); ++k) {
        loss_sum += losses[k];
        for (std::size_t i = 0; i < grads.size(); ++i) axpy(scale, parts[k].weights[i].span(), grads[i].span());
        for (TokenId r : parts[k].touched_rows) {
          axpy(scale, parts[k].embedding.row(r), grad_embedding.row(r));
          touched[r] = 1;
        }
      }
      bool finite = std::isfinite(loss_sum) && all_finite(grad_embedding.span());
      for (const auto& gw : grads) finite = finite && all_finite(gw.span());
      if (!finite) {
        throw NumericError("seq2seq training diverged at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(b));
      }
      if (cfg.clip) {
        for (auto& gw : grads)
          for (double& x : gw.span()) x = std::clamp(x, -*cfg.clip, *cfg.clip);
        for (double& x : grad_embedding.span()) x = std::clamp(x, -*cfg.clip, *cfg.clip);
      }
      for (std::size_t i = 0; i < grads.size(); ++i) {
        optim::adagrad_update(params.weights[i], grads[i], acc[i], cfg.learning_rate, cfg.l2_penalty,
                              cfg.adagrad_epsilon);
      }
      const auto& kern = kernels::active();
      for (TokenId r = 0; r < vocab_size; ++r) {
        if (!touched[r]) continue;
        kern.adagrad(spec.embed_dim, params.embedding.row(r).data(), grad_embedding.row(r).data(),
                     acc_embedding.row(r).data(), cfg.learning_rate, cfg.l2_penalty, cfg.adagrad_epsilon);
      }
    }
    result.report.epoch_loss.push_back(loss_sum / static_cast<double>(sentences.size()));
    result.report.epoch_seconds.push_back(
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
  }
  return result;
}

double reconstruction_accuracy(const Seq2SeqParams& params, const std::vector<std::vector<TokenId>>& sentences,
                               std::size_t max_len_slack) {
  if (sentences.empty()) throw DataError("no sentences to reconstruct");
  std::vector<std::size_t> hits(sentences.size()), lengths(sentences.size());
  parallel_for(sentences.size(), [&](std::size_t i) {
    const auto& src = sentences[i];
    const auto out = greedy_decode(params, encode(params, src), src.size() + max_len_slack);
    std::size_t h = 0;
    for (std::size_t k = 0; k < std::min(src.size(), out.size()); ++k) h += out[k] == src[k] ? 1 : 0;
    hits[i] = h;
    lengths[i] = std::max(src.size(), out.size());
  });
  const double num = static_cast<double>(std::accumulate(hits.begin(), hits.end(), std::size_t{0}));
  const double den = static_cast<double>(std::accumulate(lengths.begin(), lengths.end(), std::size_t{0}));
  return num / den;
}

namespace {

std::vector<double> average_ranks(std::span<const double> x) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(x.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
    const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DimensionError("spearman: length mismatch");
  if (x.size() < 2) return 0.0;
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mean = (n + 1.0) / 2.0;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mean) * (ry[i] - mean);
    sxx += (rx[i] - mean) * (rx[i] - mean);
    syy += (ry[i] - mean) * (ry[i] - mean);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace nnviz::seq2seq
