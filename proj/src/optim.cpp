#include "nnviz/optim.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "nnviz/errors.hpp"
#include "nnviz/io.hpp"
#include "nnviz/kernels.hpp"
#include "nnviz/parallel.hpp"
#include "nnviz/text.hpp"

namespace nnviz::optim {

using models::ForwardTrace;
using models::Objective;

std::string to_string(EvalTask task) { return task == EvalTask::fine ? "fine" : "coarse"; }

EvalTask parse_eval_task(const std::string& name) {
  if (name == "fine") return EvalTask::fine;
  if (name == "coarse") return EvalTask::coarse;
  throw ParameterError("unknown task '" + name + "' (expected fine or coarse)");
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ParameterError("learning_rate must be > 0");
  if (!(l2_penalty >= 0.0)) throw ParameterError("l2_penalty must be >= 0");
  if (batch_size < 1) throw ParameterError("batch_size must be >= 1");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ParameterError("dropout_rate must lie in [0, 1)");
  if (embed_dim < 1 || hidden_dim < 1) throw ParameterError("embed_dim and hidden_dim must be >= 1");
  if (!(adagrad_epsilon >= 0.0)) throw ParameterError("adagrad_epsilon must be >= 0");
  if (clip && !(*clip > 0.0)) throw ParameterError("clip must be > 0");
  if (layers < 1) throw ParameterError("layers must be >= 1");
  if (min_count < 1) throw ParameterError("min_count must be >= 1");
  if (!(init_scale > 0.0)) throw ParameterError("init_scale must be > 0");
}

ArchSpec TrainConfig::apply_to(ArchSpec spec) const {
  spec.embed_dim = embed_dim;
  spec.hidden_dim = hidden_dim;
  spec.layers = spec.kind == models::ArchKind::mlrnn ? layers : 1;
  spec.use_bias = use_bias;
  spec.lstm_output = lstm_output;
  return spec;
}

namespace {

bool parse_bool(std::string_view v, std::string_view key) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ParameterError(std::string(key) + ": expected true or false");
}

std::size_t parse_count(std::string_view v, std::string_view key) {
  const long long n = parse_integer(v, key);
  if (n < 0) throw ParameterError(std::string(key) + " must be non-negative");
  return static_cast<std::size_t>(n);
}

using Setter = std::function<void(TrainConfig&, std::string_view)>;

const std::map<std::string, Setter, std::less<>>& setters() {
  static const std::map<std::string, Setter, std::less<>> table = {
      {"learning_rate", [](TrainConfig& c, std::string_view v) { c.learning_rate = parse_double(v, "learning_rate"); }},
      {"l2_penalty", [](TrainConfig& c, std::string_view v) { c.l2_penalty = parse_double(v, "l2_penalty"); }},
      {"batch_size", [](TrainConfig& c, std::string_view v) { c.batch_size = parse_count(v, "batch_size"); }},
      {"max_epochs", [](TrainConfig& c, std::string_view v) { c.max_epochs = parse_count(v, "max_epochs"); }},
      {"dropout_rate", [](TrainConfig& c, std::string_view v) { c.dropout_rate = parse_double(v, "dropout_rate"); }},
      {"embed_dim", [](TrainConfig& c, std::string_view v) { c.embed_dim = parse_count(v, "embed_dim"); }},
      {"hidden_dim", [](TrainConfig& c, std::string_view v) { c.hidden_dim = parse_count(v, "hidden_dim"); }},
      {"seed", [](TrainConfig& c, std::string_view v) { c.seed = parse_count(v, "seed"); }},
      {"eval_task", [](TrainConfig& c, std::string_view v) { c.eval_task = parse_eval_task(std::string(v)); }},
      {"adagrad_epsilon",
       [](TrainConfig& c, std::string_view v) { c.adagrad_epsilon = parse_double(v, "adagrad_epsilon"); }},
      {"clip",
       [](TrainConfig& c, std::string_view v) {
         if (v == "none") {
           c.clip.reset();
         } else {
           c.clip = parse_double(v, "clip");
         }
       }},
      {"layers", [](TrainConfig& c, std::string_view v) { c.layers = parse_count(v, "layers"); }},
      {"min_count", [](TrainConfig& c, std::string_view v) { c.min_count = static_cast<int>(parse_count(v, "min_count")); }},
      {"lstm_output",
       [](TrainConfig& c, std::string_view v) { c.lstm_output = models::parse_lstm_output(std::string(v)); }},
      {"use_bias", [](TrainConfig& c, std::string_view v) { c.use_bias = parse_bool(v, "use_bias"); }},
      {"init_scale", [](TrainConfig& c, std::string_view v) { c.init_scale = parse_double(v, "init_scale"); }},
  };
  return table;
}

}  // namespace

TrainConfig parse_config(std::string_view text, TrainConfig cfg) {
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (!line.empty()) {
      const auto eq = line.find('=');
      if (eq == std::string_view::npos) throw ParseError("config: expected key=value", pos);
      const std::string_view key = trim(line.substr(0, eq));
      const std::string_view value = trim(line.substr(eq + 1));
      const auto it = setters().find(key);
      if (it == setters().end()) throw ParseError("config: unknown key '" + std::string(key) + "'", pos);
      try {
        it->second(cfg, value);
      } catch (const ParameterError& e) {
        throw ParseError(std::string("config: ") + e.what(), pos);
      }
    }
    pos = eol + 1;
  }
  cfg.validate();
  return cfg;
}

TrainConfig load_config(const std::string& path, TrainConfig base) {
  return parse_config(read_file(path), base);
}

std::string serialize_config(const TrainConfig& c) {
  std::string out;
  auto put = [&](const char* key, const std::string& value) {
    out += key;
    out += '=';
    out += value;
    out += '\n';
  };
  put("learning_rate", format_double(c.learning_rate));
  put("l2_penalty", format_double(c.l2_penalty));
  put("batch_size", std::to_string(c.batch_size));
  put("max_epochs", std::to_string(c.max_epochs));
  put("dropout_rate", format_double(c.dropout_rate));
  put("embed_dim", std::to_string(c.embed_dim));
  put("hidden_dim", std::to_string(c.hidden_dim));
  put("seed", std::to_string(c.seed));
  put("eval_task", to_string(c.eval_task));
  put("adagrad_epsilon", format_double(c.adagrad_epsilon));
  put("clip", c.clip ? format_double(*c.clip) : "none");
  put("layers", std::to_string(c.layers));
  put("min_count", std::to_string(c.min_count));
  put("lstm_output", models::to_string(c.lstm_output));
  put("use_bias", c.use_bias ? "true" : "false");
  put("init_scale", format_double(c.init_scale));
  return out;
}

AdagradState make_adagrad_state(const ModelParams& params) {
  AdagradState s;
  s.embedding = Matrix(params.embedding.rows(), params.embedding.cols());
  for (const auto& w : params.weights) s.weights.emplace_back(w.rows(), w.cols());
  return s;
}

ParamGradients zero_param_gradients(const ModelParams& params) {
  ParamGradients g;
  g.embedding = Matrix(params.embedding.rows(), params.embedding.cols());
  for (const auto& w : params.weights) g.weights.emplace_back(w.rows(), w.cols());
  return g;
}

void adagrad_update(Matrix& theta, const Matrix& grad, Matrix& acc, double learning_rate, double l2, double epsilon) {
  if (theta.rows() != grad.rows() || theta.cols() != grad.cols() || theta.rows() != acc.rows() ||
      theta.cols() != acc.cols()) {
    throw DimensionError("adagrad: parameter " + theta.shape_string() + ", gradient " + grad.shape_string() +
                         ", accumulator " + acc.shape_string());
  }
  kernels::active().adagrad(theta.size(), theta.data(), grad.data(), acc.data(), learning_rate, l2, epsilon);
}

void adagrad_step(ModelParams& params, const ParamGradients& grads, AdagradState& state, const TrainConfig& cfg) {
  if (grads.weights.size() != params.weights.size() || state.weights.size() != params.weights.size()) {
    throw DimensionError("adagrad: tensor count mismatch");
  }
  for (std::size_t i = 0; i < grads.weights.size(); ++i) {
    if (!all_finite(grads.weights[i].span())) {
      throw NumericError("adagrad: non-finite gradient in tensor " + std::to_string(i));
    }
  }
  for (std::size_t r : grads.touched_rows) {
    if (r >= params.embedding.rows()) throw DimensionError("adagrad: embedding row out of range");
    if (!all_finite(grads.embedding.row(r))) {
      throw NumericError("adagrad: non-finite gradient in embedding row " + std::to_string(r));
    }
  }
  const auto& k = kernels::active();
  const double lr = cfg.learning_rate;
  const double l2 = cfg.l2_penalty;
  const double eps = cfg.adagrad_epsilon;
  for (std::size_t i = 0; i < params.weights.size(); ++i) {
    adagrad_update(params.weights[i], grads.weights[i], state.weights[i], lr, l2, eps);
  }
  const std::size_t d = params.embedding.cols();
  for (std::size_t r : grads.touched_rows) {
    k.adagrad(d, params.embedding.row(r).data(), grads.embedding.row(r).data(), state.embedding.row(r).data(), lr, l2,
              eps);
  }
}

Vector dropout_mask(std::size_t dim, double rate, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) throw ParameterError("dropout rate must lie in [0, 1)");
  Vector mask(dim, 1.0);
  if (rate == 0.0) return mask;
  const double keep = 1.0 / (1.0 - rate);
  for (double& m : mask) m = rng.uniform() < rate ? 0.0 : keep;
  return mask;
}

bool operator==(const TrainReport& a, const TrainReport& b) {
  if (a.best_epoch != b.best_epoch || a.best_dev_accuracy != b.best_dev_accuracy) return false;
  if (a.epochs.size() != b.epochs.size()) return false;
  for (std::size_t i = 0; i < a.epochs.size(); ++i) {
    if (a.epochs[i].train_loss != b.epochs[i].train_loss || a.epochs[i].dev_accuracy != b.epochs[i].dev_accuracy) {
      return false;
    }
  }
  return true;
}

std::optional<std::size_t> training_target(const PhraseExample& example, std::size_t num_classes) {
  if (num_classes == 2) {
    if (!example.coarse_label) return std::nullopt;
    return static_cast<std::size_t>(*example.coarse_label);
  }
  if (example.fine_label < 0 || static_cast<std::size_t>(example.fine_label) >= num_classes) return std::nullopt;
  return static_cast<std::size_t>(example.fine_label);
}

namespace {

struct ExampleResult {
  double loss = 0.0;
  models::Gradients grads;
};

models::DropoutMasks draw_masks(const ArchSpec& spec, std::size_t steps, double rate, Rng rng) {
  models::DropoutMasks masks;
  const Vector in = dropout_mask(steps * spec.embed_dim, rate, rng);
  masks.inputs = Matrix(steps, spec.embed_dim, in.values());
  masks.representation = dropout_mask(spec.output_dim(), rate, rng);
  return masks;
}

}  // namespace

double batch_gradient(const ModelParams& params, std::span<const PhraseExample> examples,
                      std::span<const std::size_t> batch, double dropout_rate, const Rng* dropout,
                      ParamGradients& out) {
  const ArchSpec& spec = params.spec;
  for (auto& w : out.weights) w.fill(0.0);
  for (std::size_t r : out.touched_rows) std::fill(out.embedding.row(r).begin(), out.embedding.row(r).end(), 0.0);
  out.touched_rows.clear();

  std::vector<ExampleResult> results(batch.size());
  std::vector<char> used(batch.size(), 0);
  parallel_for(batch.size(), [&](std::size_t pos) {
    const PhraseExample& ex = examples[batch[pos]];
    const auto target = training_target(ex, spec.num_classes);
    if (!target) return;
    used[pos] = 1;
    const Objective obj = Objective::cross_entropy(*target);
    ForwardTrace trace;
    if (dropout && dropout_rate > 0.0) {
      const auto masks = draw_masks(spec, ex.tokens.size(), dropout_rate, dropout->split(pos));
      trace = models::forward(params, ex.tokens, &masks);
    } else {
      trace = models::forward(params, ex.tokens);
    }
    results[pos].loss = models::objective_value(trace, obj);
    results[pos].grads = models::backward(params, trace, obj);
  });

  std::size_t count = 0;
  for (char u : used) count += static_cast<std::size_t>(u);
  if (count == 0) return 0.0;
  const double scale = 1.0 / static_cast<double>(count);

  double loss = 0.0;
  std::vector<char> touched(params.embedding.rows(), 0);
  for (std::size_t pos = 0; pos < batch.size(); ++pos) {
    if (!used[pos]) continue;
    const ExampleResult& r = results[pos];
    loss += r.loss;
    for (std::size_t i = 0; i < out.weights.size(); ++i) axpy(scale, r.grads.weights[i].span(), out.weights[i].span());
    for (std::size_t t = 0; t < r.grads.tokens.size(); ++t) {
      const auto id = r.grads.tokens[t];
      axpy(scale, r.grads.inputs.row(t), out.embedding.row(id));
      touched[id] = 1;
    }
  }
  for (std::size_t id = 0; id < touched.size(); ++id) {
    if (touched[id]) out.touched_rows.push_back(id);
  }
  return loss * scale;
}

namespace {

void clip_gradients(ParamGradients& g, double bound) {
  auto clamp_all = [bound](std::span<double> xs) {
    for (double& x : xs) x = std::clamp(x, -bound, bound);
  };
  for (auto& w : g.weights) clamp_all(w.span());
  for (std::size_t r : g.touched_rows) clamp_all(g.embedding.row(r));
}

}  // namespace

TrainResult train_classifier(const ArchSpec& spec_in, const TrainConfig& cfg, std::span<const PhraseExample> train,
                             std::span<const PhraseExample> dev, std::size_t vocab_size) {
  cfg.validate();
  spec_in.validate();
  if (cfg.eval_task == EvalTask::fine && spec_in.num_classes != 5) {
    throw ParameterError("fine dev evaluation needs a 5-class model; set eval_task=coarse");
  }
  if (train.empty()) throw DataError("training corpus is empty");
  if (dev.empty()) throw DataError("dev corpus is empty");
  for (auto corpus : {train, dev}) {
    for (const auto& ex : corpus) {
      if (ex.tokens.empty()) throw DataError("corpus contains an empty example");
      for (auto id : ex.tokens) {
        if (id >= vocab_size) throw DataError("token id " + std::to_string(id) + " outside vocabulary");
      }
    }
  }

  const Rng root(cfg.seed);
  Rng init_rng = root.split(1);
  TrainResult result;
  result.params = models::random_params(spec_in, vocab_size, cfg.init_scale, init_rng);
  if (cfg.max_epochs == 0) return result;

  ModelParams params = result.params;
  AdagradState state = make_adagrad_state(params);
  ParamGradients grads = zero_param_gradients(params);
  const Rng epoch_root = root.split(2);

  for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    const Rng epoch_rng = epoch_root.split(epoch);
    Rng shuffle = epoch_rng.split(0);
    const auto batches = corpus::make_batches(train.size(), cfg.batch_size, shuffle);
    double loss_sum = 0.0;
    std::size_t loss_count = 0;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      const Rng dropout = epoch_rng.split(b + 1);
      const double loss = batch_gradient(params, train, batches[b], cfg.dropout_rate, &dropout, grads);
      if (!std::isfinite(loss)) {
        throw NumericError("training diverged at epoch " + std::to_string(epoch) + ", batch " + std::to_string(b));
      }
      std::size_t n = 0;
      for (auto i : batches[b]) n += training_target(train[i], spec_in.num_classes) ? 1 : 0;
      if (n == 0) continue;
      loss_sum += loss * static_cast<double>(n);
      loss_count += n;
      if (cfg.clip) clip_gradients(grads, *cfg.clip);
      try {
        adagrad_step(params, grads, state, cfg);
      } catch (const NumericError& e) {
        throw NumericError(std::string(e.what()) + " (epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(b) + ")");
      }
    }
    EpochStats stats;
    stats.train_loss = loss_count ? loss_sum / static_cast<double>(loss_count) : 0.0;
    stats.dev_accuracy = evaluate(params, dev, cfg.eval_task);
    stats.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.report.epochs.push_back(stats);
    if (!result.report.best_epoch || stats.dev_accuracy > result.report.best_dev_accuracy) {
      result.report.best_epoch = epoch;
      result.report.best_dev_accuracy = stats.dev_accuracy;
      result.params = params;
    }
  }
  return result;
}

std::size_t predict(const ModelParams& params, std::span<const corpus::TokenId> tokens, EvalTask task) {
  const ForwardTrace trace = models::forward(params, tokens);
  const auto& p = trace.probabilities;
  if (task == EvalTask::fine || params.spec.num_classes == 2) return argmax(p.span());
  if (params.spec.num_classes != 5) throw ParameterError("coarse prediction needs a 2- or 5-class model");
  const double negative = p[0] + p[1];
  const double positive = p[3] + p[4];
  return positive > negative ? 1 : 0;
}

double evaluate(const ModelParams& params, std::span<const PhraseExample> examples, EvalTask task) {
  if (task == EvalTask::fine && params.spec.num_classes != 5) {
    throw ParameterError("fine evaluation needs a 5-class model; use the coarse task");
  }
  std::vector<std::size_t> scored;
  std::vector<std::size_t> gold;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    if (task == EvalTask::coarse) {
      if (!examples[i].coarse_label) continue;
      gold.push_back(static_cast<std::size_t>(*examples[i].coarse_label));
    } else {
      gold.push_back(static_cast<std::size_t>(examples[i].fine_label));
    }
    scored.push_back(i);
  }
  if (scored.empty()) throw DataError("evaluation set is empty");
  std::vector<char> correct(scored.size(), 0);
  parallel_for(scored.size(), [&](std::size_t k) {
    correct[k] = predict(params, examples[scored[k]].tokens, task) == gold[k] ? 1 : 0;
  });
  std::size_t hits = 0;
  for (char c : correct) hits += static_cast<std::size_t>(c);
  return static_cast<double>(hits) / static_cast<double>(scored.size());
}

}  // namespace nnviz::optim
