#include "nnviz/models.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "nnviz/errors.hpp"

namespace nnviz::models {

std::string to_string(ArchKind kind) {
  switch (kind) {
    case ArchKind::rnn:
      return "rnn";
    case ArchKind::mlrnn:
      return "mlrnn";
    case ArchKind::lstm:
      return "lstm";
    case ArchKind::bilstm:
      return "bilstm";
  }
  return "unknown";
}

ArchKind parse_arch(const std::string& name) {
  if (name == "rnn") return ArchKind::rnn;
  if (name == "mlrnn") return ArchKind::mlrnn;
  if (name == "lstm") return ArchKind::lstm;
  if (name == "bilstm") return ArchKind::bilstm;
  throw ParameterError("unknown architecture '" + name + "' (expected rnn, mlrnn, lstm or bilstm)");
}

std::string to_string(LstmOutput mode) { return mode == LstmOutput::tanh_cell ? "tanh_cell" : "raw_cell"; }

LstmOutput parse_lstm_output(const std::string& name) {
  if (name == "tanh_cell") return LstmOutput::tanh_cell;
  if (name == "raw_cell") return LstmOutput::raw_cell;
  throw ParameterError("unknown lstm_output '" + name + "' (expected tanh_cell or raw_cell)");
}

std::size_t ArchSpec::output_dim() const noexcept { return kind == ArchKind::bilstm ? 2 * hidden_dim : hidden_dim; }

void ArchSpec::validate() const {
  if (embed_dim == 0 || hidden_dim == 0) throw ParameterError("embed_dim and hidden_dim must be positive");
  if (num_classes == 0) throw ParameterError("num_classes must be positive");
  if (layers == 0) throw ParameterError("layers must be >= 1");
  if (layers != 1 && kind != ArchKind::mlrnn) throw ParameterError("layers > 1 is only valid for mlrnn");
  if (activation == Activation::sigmoid) throw ParameterError("recurrent activation must be tanh or identity");
}

namespace {

bool is_lstm(ArchKind kind) { return kind == ArchKind::lstm || kind == ArchKind::bilstm; }

std::vector<std::string> lstm_directions(ArchKind kind) {
  if (kind == ArchKind::bilstm) return {"fwd", "bwd"};
  return {"fwd"};
}

}  // namespace

std::vector<TensorShape> weight_layout(const ArchSpec& spec) {
  spec.validate();
  const std::size_t d = spec.embed_dim;
  const std::size_t h = spec.hidden_dim;
  std::vector<TensorShape> out;
  if (is_lstm(spec.kind)) {
    for (const auto& dir : lstm_directions(spec.kind)) {
      out.push_back({"lstm." + dir + ".input", 4 * h, d});
      out.push_back({"lstm." + dir + ".recurrent", 4 * h, h});
      if (spec.use_bias) out.push_back({"lstm." + dir + ".bias", 4 * h, 1});
    }
  } else {
    for (std::size_t l = 0; l < spec.layers; ++l) {
      const std::string prefix = "rnn.l" + std::to_string(l);
      out.push_back({prefix + ".input", h, l == 0 ? d : h});
      out.push_back({prefix + ".recurrent", h, h});
      if (spec.use_bias) out.push_back({prefix + ".bias", h, 1});
    }
  }
  out.push_back({"classifier.weight", spec.num_classes, spec.output_dim()});
  out.push_back({"classifier.bias", spec.num_classes, 1});
  return out;
}

WeightIndex weight_index(const ArchSpec& spec) {
  WeightIndex index{};
  std::size_t next = 0;
  auto slots = [&]() {
    RecurrentSlots s{next, next + 1, std::nullopt};
    next += 2;
    if (spec.use_bias) s.bias = next++;
    return s;
  };
  if (is_lstm(spec.kind)) {
    for (std::size_t i = 0; i < lstm_directions(spec.kind).size(); ++i) index.lstm_dirs.push_back(slots());
  } else {
    for (std::size_t l = 0; l < spec.layers; ++l) index.rnn_layers.push_back(slots());
  }
  index.classifier_weight = next++;
  index.classifier_bias = next++;
  return index;
}

void ModelParams::validate() const {
  const auto layout = weight_layout(spec);
  if (embedding.cols() != spec.embed_dim) {
    throw DimensionError("embedding table is " + embedding.shape_string() + ", expected embed_dim " +
                         std::to_string(spec.embed_dim) + " columns");
  }
  if (weights.size() != layout.size()) {
    throw DimensionError("expected " + std::to_string(layout.size()) + " weight tensors, got " +
                         std::to_string(weights.size()));
  }
  for (std::size_t i = 0; i < layout.size(); ++i) {
    if (weights[i].rows() != layout[i].rows || weights[i].cols() != layout[i].cols) {
      throw DimensionError("tensor '" + layout[i].name + "' is " + weights[i].shape_string() + ", expected " +
                           std::to_string(layout[i].rows) + "x" + std::to_string(layout[i].cols));
    }
  }
}

ModelParams zero_params(const ArchSpec& spec, std::size_t vocab_size) {
  ModelParams p{spec, Matrix(vocab_size, spec.embed_dim), {}};
  for (const auto& shape : weight_layout(spec)) p.weights.emplace_back(shape.rows, shape.cols);
  return p;
}

ModelParams random_params(const ArchSpec& spec, std::size_t vocab_size, double scale, Rng& rng) {
  ModelParams p{spec, init_uniform(vocab_size, spec.embed_dim, scale, rng), {}};
  for (const auto& shape : weight_layout(spec)) p.weights.push_back(init_uniform(shape.rows, shape.cols, scale, rng));
  return p;
}

// ---- LSTM ----------------------------------------------------------------------

LstmState LstmTrace::final_state() const {
  if (steps() == 0) return initial;
  return {Vector(hidden.row(steps() - 1)), Vector(cells.row(steps() - 1))};
}

void lstm_step(const LstmWeights& w, std::span<const double> x, std::span<const double> h_prev,
               std::span<const double> c_prev, std::span<double> gates, std::span<double> cell,
               std::span<double> memory, std::span<double> hidden) {
  const std::size_t h = w.hidden_dim();
  matvec(w.input, x, gates);
  Vector recurrent(4 * h);
  matvec(w.recurrent, h_prev, recurrent.span());
  for (std::size_t k = 0; k < 4 * h; ++k) gates[k] += recurrent[k];
  if (w.bias) {
    for (std::size_t k = 0; k < 4 * h; ++k) gates[k] += w.bias->data()[k];
  }
  for (std::size_t k = 0; k < 3 * h; ++k) gates[k] = sigmoid(gates[k]);
  for (std::size_t k = 3 * h; k < 4 * h; ++k) gates[k] = std::tanh(gates[k]);

  const double* in_gate = gates.data();
  const double* forget = gates.data() + h;
  const double* out_gate = gates.data() + 2 * h;
  const double* candidate = gates.data() + 3 * h;
  for (std::size_t k = 0; k < h; ++k) {
    cell[k] = forget[k] * c_prev[k] + in_gate[k] * candidate[k];
    memory[k] = w.output == LstmOutput::tanh_cell ? std::tanh(cell[k]) : cell[k];
    hidden[k] = out_gate[k] * memory[k];
  }
}

LstmTrace lstm_forward(const LstmWeights& w, const Matrix& inputs, const LstmState& initial) {
  const std::size_t h = w.hidden_dim();
  const std::size_t steps = inputs.rows();
  if (inputs.cols() != w.input.cols()) {
    throw DimensionError("lstm input width " + std::to_string(inputs.cols()) + " vs weights " +
                         w.input.shape_string());
  }
  if (initial.hidden.size() != h || initial.cell.size() != h) throw DimensionError("lstm initial state width");
  LstmTrace trace{Matrix(steps, 4 * h), Matrix(steps, h), Matrix(steps, h), Matrix(steps, h), initial};
  for (std::size_t t = 0; t < steps; ++t) {
    const auto h_prev = t == 0 ? initial.hidden.span() : std::span<const double>(trace.hidden.row(t - 1));
    const auto c_prev = t == 0 ? initial.cell.span() : std::span<const double>(trace.cells.row(t - 1));
    lstm_step(w, inputs.row(t), h_prev, c_prev, trace.gates.row(t), trace.cells.row(t), trace.memory.row(t),
              trace.hidden.row(t));
  }
  return trace;
}

LstmBackward lstm_backward(const LstmWeights& w, LstmGradRefs grads, const LstmTrace& trace, const Matrix& inputs,
                           const Matrix& d_hidden, std::span<const double> d_final_cell) {
  const std::size_t h = w.hidden_dim();
  const std::size_t steps = trace.steps();
  if (inputs.rows() != steps || d_hidden.rows() != steps || d_hidden.cols() != h) {
    throw DimensionError("lstm backward: trace/upstream shapes disagree");
  }
  LstmBackward out{Matrix(steps, inputs.cols()), {Vector(h), Vector(h)}};
  Vector dh_next(h);
  Vector dc_next(h);
  if (!d_final_cell.empty()) std::copy(d_final_cell.begin(), d_final_cell.end(), dc_next.begin());
  Vector dz(4 * h);

  for (std::size_t t = steps; t-- > 0;) {
    const auto gates = trace.gates.row(t);
    const auto memory = trace.memory.row(t);
    const auto h_prev = t == 0 ? trace.initial.hidden.span() : std::span<const double>(trace.hidden.row(t - 1));
    const auto c_prev = t == 0 ? trace.initial.cell.span() : std::span<const double>(trace.cells.row(t - 1));
    const auto upstream = d_hidden.row(t);
    for (std::size_t k = 0; k < h; ++k) {
      const double in_gate = gates[k];
      const double forget = gates[h + k];
      const double out_gate = gates[2 * h + k];
      const double candidate = gates[3 * h + k];
      const double dh = upstream[k] + dh_next[k];
      const double memory_slope = w.output == LstmOutput::tanh_cell ? 1.0 - memory[k] * memory[k] : 1.0;
      const double dc = dc_next[k] + dh * out_gate * memory_slope;
      dz[k] = dc * candidate * in_gate * (1.0 - in_gate);
      dz[h + k] = dc * c_prev[k] * forget * (1.0 - forget);
      dz[2 * h + k] = dh * memory[k] * out_gate * (1.0 - out_gate);
      dz[3 * h + k] = dc * in_gate * (1.0 - candidate * candidate);
      dc_next[k] = dc * forget;
    }
    outer_acc(grads.input, dz.span(), inputs.row(t));
    outer_acc(grads.recurrent, dz.span(), h_prev);
    if (grads.bias) axpy(1.0, dz.span(), grads.bias->span());
    matvec_transposed_acc(w.input, dz.span(), out.d_inputs.row(t));
    std::fill(dh_next.begin(), dh_next.end(), 0.0);
    matvec_transposed_acc(w.recurrent, dz.span(), dh_next.span());
  }
  out.d_initial = {std::move(dh_next), std::move(dc_next)};
  return out;
}

// ---- Classifier ------------------------------------------------------------------

namespace {

const Matrix* optional_tensor(const std::vector<Matrix>& weights, const std::optional<std::size_t>& slot) {
  return slot ? &weights[*slot] : nullptr;
}

Matrix* optional_tensor(std::vector<Matrix>& weights, const std::optional<std::size_t>& slot) {
  return slot ? &weights[*slot] : nullptr;
}

LstmWeights lstm_view(const ModelParams& params, const RecurrentSlots& slots) {
  return {params.weights[slots.input], params.weights[slots.recurrent], optional_tensor(params.weights, slots.bias),
          params.spec.lstm_output};
}

Matrix reversed_rows(const Matrix& m) {
  Matrix out(m.rows(), m.cols());
  for (std::size_t t = 0; t < m.rows(); ++t) {
    const auto src = m.row(m.rows() - 1 - t);
    std::copy(src.begin(), src.end(), out.row(t).begin());
  }
  return out;
}

Matrix rnn_layer_forward(const ModelParams& params, const RecurrentSlots& slots, const Matrix& inputs) {
  const Matrix& w_in = params.weights[slots.input];
  const Matrix& w_rec = params.weights[slots.recurrent];
  const Matrix* bias = optional_tensor(params.weights, slots.bias);
  const std::size_t h = w_rec.rows();
  Matrix states(inputs.rows(), h);
  Vector recurrent(h);
  for (std::size_t t = 0; t < inputs.rows(); ++t) {
    auto out = states.row(t);
    matvec(w_in, inputs.row(t), out);
    if (t > 0) {
      matvec(w_rec, states.row(t - 1), recurrent.span());
      for (std::size_t k = 0; k < h; ++k) out[k] += recurrent[k];
    }
    if (bias) {
      for (std::size_t k = 0; k < h; ++k) out[k] += bias->data()[k];
    }
    for (double& v : out) v = activate(params.spec.activation, v);
  }
  return states;
}

// Returns d inputs; accumulates parameter gradients.
Matrix rnn_layer_backward(const ModelParams& params, const RecurrentSlots& slots, Gradients& grads,
                          const Matrix& inputs, const Matrix& states, const Matrix& upstream) {
  const Matrix& w_in = params.weights[slots.input];
  const Matrix& w_rec = params.weights[slots.recurrent];
  Matrix& g_in = grads.weights[slots.input];
  Matrix& g_rec = grads.weights[slots.recurrent];
  Matrix* g_bias = optional_tensor(grads.weights, slots.bias);
  const std::size_t h = w_rec.rows();
  Matrix d_inputs(inputs.rows(), inputs.cols());
  Vector dh_next(h);
  Vector da(h);
  for (std::size_t t = inputs.rows(); t-- > 0;) {
    const auto state = states.row(t);
    const auto up = upstream.row(t);
    for (std::size_t k = 0; k < h; ++k) {
      da[k] = (up[k] + dh_next[k]) * activation_slope(params.spec.activation, state[k]);
    }
    if (t > 0) outer_acc(g_rec, da.span(), states.row(t - 1));
    outer_acc(g_in, da.span(), inputs.row(t));
    if (g_bias) axpy(1.0, da.span(), g_bias->span());
    matvec_transposed_acc(w_in, da.span(), d_inputs.row(t));
    std::fill(dh_next.begin(), dh_next.end(), 0.0);
    matvec_transposed_acc(w_rec, da.span(), dh_next.span());
  }
  return d_inputs;
}

void check_masks(const ArchSpec& spec, std::size_t steps, const DropoutMasks* masks) {
  if (!masks) return;
  if (!masks->inputs.empty() && (masks->inputs.rows() != steps || masks->inputs.cols() != spec.embed_dim)) {
    throw DimensionError("input dropout mask is " + masks->inputs.shape_string());
  }
  if (!masks->representation.empty() && masks->representation.size() != spec.output_dim()) {
    throw DimensionError("representation dropout mask has " + std::to_string(masks->representation.size()) +
                         " entries, expected " + std::to_string(spec.output_dim()));
  }
}

}  // namespace

ForwardTrace forward_embedded(const ModelParams& params, const Matrix& embedded, const DropoutMasks* masks) {
  const ArchSpec& spec = params.spec;
  if (embedded.rows() == 0) throw DataError("forward: empty input sequence");
  if (embedded.cols() != spec.embed_dim) {
    throw DimensionError("forward: embedded input is " + embedded.shape_string() + ", expected width " +
                         std::to_string(spec.embed_dim));
  }
  check_masks(spec, embedded.rows(), masks);
  const WeightIndex index = weight_index(spec);
  const std::size_t steps = embedded.rows();
  const std::size_t h = spec.hidden_dim;

  ForwardTrace trace;
  trace.embedded = embedded;
  trace.inputs = embedded;
  if (masks && !masks->inputs.empty()) {
    trace.input_mask = masks->inputs;
    for (std::size_t i = 0; i < trace.inputs.size(); ++i) trace.inputs.data()[i] *= trace.input_mask.data()[i];
  }

  trace.representation = Vector(spec.output_dim());
  if (is_lstm(spec.kind)) {
    const LstmState zero{Vector(h), Vector(h)};
    trace.lstm.push_back(lstm_forward(lstm_view(params, index.lstm_dirs[0]), trace.inputs, zero));
    const auto fwd_last = trace.lstm[0].hidden.row(steps - 1);
    std::copy(fwd_last.begin(), fwd_last.end(), trace.representation.begin());
    if (spec.kind == ArchKind::bilstm) {
      trace.lstm.push_back(lstm_forward(lstm_view(params, index.lstm_dirs[1]), reversed_rows(trace.inputs), zero));
      // The backward pass ends at t = 1, i.e. its last processed row.
      const auto bwd_first = trace.lstm[1].hidden.row(steps - 1);
      std::copy(bwd_first.begin(), bwd_first.end(), trace.representation.begin() + static_cast<std::ptrdiff_t>(h));
    }
  } else {
    const Matrix* layer_input = &trace.inputs;
    for (const auto& slots : index.rnn_layers) {
      trace.layer_states.push_back(rnn_layer_forward(params, slots, *layer_input));
      layer_input = &trace.layer_states.back();
    }
    const auto last = trace.layer_states.back().row(steps - 1);
    std::copy(last.begin(), last.end(), trace.representation.begin());
  }

  trace.classifier_input = trace.representation;
  if (masks && !masks->representation.empty()) {
    trace.representation_mask = masks->representation;
    for (std::size_t k = 0; k < trace.classifier_input.size(); ++k) {
      trace.classifier_input[k] *= trace.representation_mask[k];
    }
  }
  trace.logits = matvec(params.weights[index.classifier_weight], trace.classifier_input.span());
  const Matrix& u0 = params.weights[index.classifier_bias];
  for (std::size_t c = 0; c < trace.logits.size(); ++c) trace.logits[c] += u0.data()[c];
  trace.probabilities = softmax(trace.logits.span());
  return trace;
}

ForwardTrace forward(const ModelParams& params, std::span<const TokenId> tokens, const DropoutMasks* masks) {
  if (tokens.empty()) throw DataError("forward: empty input sequence");
  Matrix embedded(tokens.size(), params.spec.embed_dim);
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    if (tokens[t] >= params.vocab_size()) {
      throw DataError("forward: token id " + std::to_string(tokens[t]) + " out of range for vocabulary of " +
                      std::to_string(params.vocab_size()));
    }
    const auto row = params.embedding.row(tokens[t]);
    std::copy(row.begin(), row.end(), embedded.row(t).begin());
  }
  ForwardTrace trace = forward_embedded(params, embedded, masks);
  trace.tokens.assign(tokens.begin(), tokens.end());
  return trace;
}

double objective_value(const ForwardTrace& trace, Objective objective) {
  if (objective.index >= trace.logits.size()) throw ParameterError("objective class index out of range");
  if (objective.kind == Objective::Kind::class_logit) return trace.logits[objective.index];
  return log_sum_exp(trace.logits.span()) - trace.logits[objective.index];
}

Gradients zero_gradients(const ModelParams& params) {
  Gradients g;
  for (const auto& w : params.weights) g.weights.emplace_back(w.rows(), w.cols());
  return g;
}

Gradients backward(const ModelParams& params, const ForwardTrace& trace, Objective objective) {
  const ArchSpec& spec = params.spec;
  const std::size_t h = spec.hidden_dim;
  const std::size_t steps = trace.steps();
  if (objective.index >= spec.num_classes) {
    throw ParameterError("objective class " + std::to_string(objective.index) + " >= num_classes " +
                         std::to_string(spec.num_classes));
  }
  const bool shapes_ok =
      steps > 0 && trace.inputs.cols() == spec.embed_dim && trace.logits.size() == spec.num_classes &&
      trace.classifier_input.size() == spec.output_dim() &&
      (is_lstm(spec.kind)
           ? trace.lstm.size() == (spec.kind == ArchKind::bilstm ? 2u : 1u) && trace.lstm[0].hidden.cols() == h
           : trace.layer_states.size() == spec.layers && trace.layer_states[0].cols() == h);
  if (!shapes_ok) throw DimensionError("backward: trace does not match the model (stale trace?)");

  const WeightIndex index = weight_index(spec);
  Gradients grads = zero_gradients(params);

  Vector d_logits(spec.num_classes);
  if (objective.kind == Objective::Kind::class_logit) {
    d_logits[objective.index] = 1.0;
  } else {
    for (std::size_t c = 0; c < spec.num_classes; ++c) d_logits[c] = trace.probabilities[c];
    d_logits[objective.index] -= 1.0;
  }
  outer_acc(grads.weights[index.classifier_weight], d_logits.span(), trace.classifier_input.span());
  axpy(1.0, d_logits.span(), grads.weights[index.classifier_bias].span());
  Vector d_rep(spec.output_dim());
  matvec_transposed_acc(params.weights[index.classifier_weight], d_logits.span(), d_rep.span());
  if (!trace.representation_mask.empty()) {
    for (std::size_t k = 0; k < d_rep.size(); ++k) d_rep[k] *= trace.representation_mask[k];
  }

  Matrix d_inputs;
  if (is_lstm(spec.kind)) {
    Matrix d_hidden(steps, h);
    std::copy(d_rep.begin(), d_rep.begin() + static_cast<std::ptrdiff_t>(h), d_hidden.row(steps - 1).begin());
    const auto& fwd = index.lstm_dirs[0];
    d_inputs = lstm_backward(lstm_view(params, fwd),
                             {grads.weights[fwd.input], grads.weights[fwd.recurrent],
                              optional_tensor(grads.weights, fwd.bias)},
                             trace.lstm[0], trace.inputs, d_hidden, {})
                   .d_inputs;
    if (spec.kind == ArchKind::bilstm) {
      Matrix d_hidden_bwd(steps, h);
      std::copy(d_rep.begin() + static_cast<std::ptrdiff_t>(h), d_rep.end(), d_hidden_bwd.row(steps - 1).begin());
      const auto& bwd = index.lstm_dirs[1];
      const Matrix reversed = reversed_rows(trace.inputs);
      const Matrix d_reversed = lstm_backward(lstm_view(params, bwd),
                                              {grads.weights[bwd.input], grads.weights[bwd.recurrent],
                                               optional_tensor(grads.weights, bwd.bias)},
                                              trace.lstm[1], reversed, d_hidden_bwd, {})
                                    .d_inputs;
      for (std::size_t t = 0; t < steps; ++t) axpy(1.0, d_reversed.row(steps - 1 - t), d_inputs.row(t));
    }
  } else {
    Matrix upstream(steps, h);
    std::copy(d_rep.begin(), d_rep.end(), upstream.row(steps - 1).begin());
    for (std::size_t l = spec.layers; l-- > 0;) {
      const Matrix& layer_input = l == 0 ? trace.inputs : trace.layer_states[l - 1];
      upstream = rnn_layer_backward(params, index.rnn_layers[l], grads, layer_input, trace.layer_states[l], upstream);
    }
    d_inputs = std::move(upstream);
  }

  if (!trace.input_mask.empty()) {
    for (std::size_t i = 0; i < d_inputs.size(); ++i) d_inputs.data()[i] *= trace.input_mask.data()[i];
  }
  grads.inputs = std::move(d_inputs);
  grads.tokens = trace.tokens;
  return grads;
}

void accumulate_embedding_gradient(const Gradients& grads, Matrix& embedding_grad) {
  if (grads.tokens.size() != grads.inputs.rows()) {
    throw DimensionError("gradients carry no token ids for their input rows");
  }
  for (std::size_t t = 0; t < grads.tokens.size(); ++t) {
    if (grads.tokens[t] >= embedding_grad.rows()) throw DimensionError("token id outside embedding gradient");
    axpy(1.0, grads.inputs.row(t), embedding_grad.row(grads.tokens[t]));
  }
}

Prediction classify(const ForwardTrace& trace) { return {argmax(trace.probabilities.span()), trace.probabilities}; }

GradCheckReport check_gradients(const ModelParams& params, std::span<const TokenId> tokens, Objective objective,
                                double epsilon, double tolerance, const GradientFn& gradient_fn,
                                std::uint64_t sample_seed) {
  ModelParams work = params;
  const ForwardTrace trace = forward(work, tokens);
  const Gradients grads = gradient_fn ? gradient_fn(work, trace, objective) : backward(work, trace, objective);

  Matrix embedding_grad(work.embedding.rows(), work.embedding.cols());
  accumulate_embedding_gradient(grads, embedding_grad);
  const std::set<TokenId> used(tokens.begin(), tokens.end());

  std::vector<ProbeTensor> probes;
  probes.push_back({"embedding", &work.embedding, &embedding_grad, {used.begin(), used.end()}});
  const auto layout = weight_layout(work.spec);
  for (std::size_t i = 0; i < work.weights.size(); ++i) {
    probes.push_back({layout[i].name, &work.weights[i], &grads.weights[i], {}});
  }
  // The objective's own last-bit rounding, divided by 2 eps, would swamp small
  // coordinates. Recompute the classifier layer in extended precision and report
  // differences from the unperturbed value instead; the derivative is unchanged.
  const WeightIndex idx = weight_index(work.spec);
  const std::vector<TokenId> input(tokens.begin(), tokens.end());
  auto precise = [&] {
    const ForwardTrace tr = forward(work, input);
    const Matrix& w = work.weights[idx.classifier_weight];
    const Matrix& b = work.weights[idx.classifier_bias];
    std::vector<long double> logits(w.rows());
    for (std::size_t c = 0; c < w.rows(); ++c) {
      long double z = b(c, 0);
      for (std::size_t k = 0; k < w.cols(); ++k)
        z += static_cast<long double>(w(c, k)) * static_cast<long double>(tr.classifier_input[k]);
      logits[c] = z;
    }
    if (objective.kind == Objective::Kind::class_logit) return logits[objective.index];
    const long double mx = *std::max_element(logits.begin(), logits.end());
    long double sum = 0.0L;
    for (long double z : logits) sum += std::exp(z - mx);
    return mx + std::log(sum) - logits[objective.index];
  };
  if (objective.index >= work.spec.num_classes) throw ParameterError("objective class index out of range");
  const long double base = precise();
  return finite_difference_check(
      probes, [&] { return static_cast<double>(precise() - base); }, epsilon, tolerance, sample_seed);
}

}  // namespace nnviz::models
