#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>

#include "nnviz/errors.hpp"
#include "nnviz/optim.hpp"

using namespace nnviz;
using namespace nnviz::optim;
using models::ArchKind;
using models::ArchSpec;

namespace {

ArchSpec small_spec(ArchKind kind, std::size_t c = 5) {
  ArchSpec s;
  s.kind = kind;
  s.embed_dim = 4;
  s.hidden_dim = 5;
  s.num_classes = c;
  return s;
}

std::vector<PhraseExample> synthetic(std::uint64_t seed, std::size_t n, corpus::Vocab& vocab, bool build) {
  Rng rng(seed);
  const auto phrases = corpus::generate_synthetic_grammar(rng, n);
  if (build) vocab = corpus::build_vocab(phrases, 1);
  return corpus::encode(vocab, phrases);
}

}  // namespace

TEST(Adagrad, FormulaOracle) {
  Matrix theta{{1.0}};
  Matrix acc{{0.0}};
  adagrad_update(theta, Matrix{{3.0}}, acc, 0.1, 0.0, 1e-8);
  EXPECT_DOUBLE_EQ(theta(0, 0), 1.0 - 0.1 * 3.0 / (3.0 + 1e-8));
  EXPECT_EQ(acc(0, 0), 9.0);
}

TEST(Adagrad, FirstStepMovesByLearningRate) {
  Rng rng(1);
  Matrix theta = init_uniform(3, 7, 1.0, rng);
  const Matrix start = theta;
  Matrix grad = init_uniform(3, 7, 5.0, rng);
  Matrix acc(3, 7);
  adagrad_update(theta, grad, acc, 0.01, 0.0, 1e-8);
  for (std::size_t i = 0; i < theta.size(); ++i) {
    EXPECT_NEAR(std::abs(theta.data()[i] - start.data()[i]), 0.01, 1e-6);
  }
}

TEST(Adagrad, ZeroGradientLeavesThetaUnchanged) {
  Matrix theta{{0.5, -2.0}};
  Matrix acc(1, 2);
  adagrad_update(theta, Matrix(1, 2), acc, 0.1, 0.0, 1e-8);
  EXPECT_EQ(theta, (Matrix{{0.5, -2.0}}));
}

TEST(Adagrad, L2DecaysTowardZero) {
  Matrix theta{{2.0}};
  Matrix acc(1, 1);
  adagrad_update(theta, Matrix(1, 1), acc, 0.1, 0.5, 1e-8);
  EXPECT_LT(theta(0, 0), 2.0);
}

TEST(Adagrad, AccumulatorMonotone) {
  Rng rng(2);
  const ModelParams base = models::random_params(small_spec(ArchKind::lstm), 6, 0.3, rng);
  ModelParams p = base;
  AdagradState state = make_adagrad_state(p);
  TrainConfig cfg;
  for (int step = 0; step < 10; ++step) {
    ParamGradients g = zero_param_gradients(p);
    for (auto& w : g.weights) w = init_uniform(w.rows(), w.cols(), 1.0, rng);
    g.touched_rows = {1, 4};
    for (auto r : g.touched_rows)
      for (double& v : g.embedding.row(r)) v = rng.uniform(-1, 1);
    const AdagradState before = state;
    adagrad_step(p, g, state, cfg);
    for (std::size_t i = 0; i < state.weights.size(); ++i)
      for (std::size_t k = 0; k < state.weights[i].size(); ++k) {
        EXPECT_GE(state.weights[i].data()[k], before.weights[i].data()[k]);
        EXPECT_GE(state.weights[i].data()[k], 0.0);
      }
  }
  // Untouched embedding rows keep their values and zero accumulators.
  EXPECT_EQ(p.embedding.row(0)[0], base.embedding.row(0)[0]);
  EXPECT_EQ(state.embedding(0, 0), 0.0);
  EXPECT_GT(state.embedding(1, 0), 0.0);
}

TEST(Adagrad, NonFiniteGradientAbortsWithoutChanges) {
  Rng rng(3);
  ModelParams p = models::random_params(small_spec(ArchKind::rnn), 5, 0.3, rng);
  const ModelParams before = p;
  AdagradState state = make_adagrad_state(p);
  ParamGradients g = zero_param_gradients(p);
  g.weights.back()(0, 0) = std::nan("");
  EXPECT_THROW(adagrad_step(p, g, state, TrainConfig{}), NumericError);
  EXPECT_EQ(p, before);
  EXPECT_EQ(state, make_adagrad_state(p));
}

TEST(Adagrad, SingleExampleStepDecreasesLoss) {
  TrainConfig cfg;
  cfg.learning_rate = 1e-3;
  cfg.l2_penalty = 0.0;
  cfg.dropout_rate = 0.0;
  for (std::uint64_t seed = 0; seed < 24; ++seed) {
    Rng rng(seed);
    const ArchKind kind = std::array{ArchKind::rnn, ArchKind::mlrnn, ArchKind::lstm, ArchKind::bilstm}[seed % 4];
    ArchSpec spec = small_spec(kind);
    if (kind == ArchKind::mlrnn) spec.layers = 2;
    ModelParams p = models::random_params(spec, 6, 0.5, rng);
    std::vector<PhraseExample> ex(1);
    for (int t = 0; t < 4; ++t) ex[0].tokens.push_back(rng.below(6));
    ex[0].fine_label = static_cast<int>(rng.below(5));
    const std::vector<std::size_t> batch = {0};
    ParamGradients g = zero_param_gradients(p);
    const double before = batch_gradient(p, ex, batch, 0.0, nullptr, g);
    AdagradState state = make_adagrad_state(p);
    adagrad_step(p, g, state, cfg);
    ParamGradients unused = zero_param_gradients(p);
    const double after = batch_gradient(p, ex, batch, 0.0, nullptr, unused);
    EXPECT_LT(after, before) << "seed " << seed;
  }
}

TEST(Dropout, RateZeroIsAllOnes) {
  Rng rng(4);
  for (double m : dropout_mask(50, 0.0, rng)) EXPECT_EQ(m, 1.0);
}

TEST(Dropout, ZeroFractionAndScale) {
  Rng rng(5);
  const Vector mask = dropout_mask(100000, 0.1, rng);
  std::size_t zeros = 0;
  double sum = 0.0;
  for (double m : mask) {
    if (m == 0.0) {
      ++zeros;
    } else {
      EXPECT_EQ(m, 1.0 / 0.9);
    }
    sum += m;
  }
  EXPECT_NEAR(static_cast<double>(zeros) / 1e5, 0.1, 0.01);
  EXPECT_NEAR(sum / 1e5, 1.0, 0.02);
}

TEST(Dropout, DeterministicAndValidated) {
  Rng a(6), b(6);
  EXPECT_EQ(dropout_mask(64, 0.3, a), dropout_mask(64, 0.3, b));
  EXPECT_THROW(dropout_mask(4, 1.0, a), ParameterError);
  EXPECT_THROW(dropout_mask(4, -0.1, a), ParameterError);
}

TEST(Config, ParsesEveryKey) {
  const TrainConfig cfg = parse_config(
      "# tuned\n"
      "learning_rate = 0.2\nl2_penalty=0\nbatch_size=8\nmax_epochs=3\ndropout_rate=0.25\n"
      "embed_dim=10\nhidden_dim=12\nseed=99\neval_task=coarse\nadagrad_epsilon=1e-6\nclip=5\n"
      "layers=2\nmin_count=2\nlstm_output=raw_cell\nuse_bias=false\ninit_scale=0.3\n");
  EXPECT_EQ(cfg.learning_rate, 0.2);
  EXPECT_EQ(cfg.batch_size, 8u);
  EXPECT_EQ(cfg.seed, 99u);
  EXPECT_EQ(cfg.eval_task, EvalTask::coarse);
  EXPECT_EQ(cfg.clip, 5.0);
  EXPECT_EQ(cfg.lstm_output, models::LstmOutput::raw_cell);
  EXPECT_FALSE(cfg.use_bias);
  EXPECT_EQ(parse_config(serialize_config(cfg)), cfg);
}

TEST(Config, Errors) {
  try {
    parse_config("seed=1\nlearning_rat=0.1\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.offset(), 7u);
  }
  EXPECT_THROW(parse_config("seed\n"), ParseError);
  EXPECT_THROW(parse_config("batch_size=abc\n"), ParseError);
  EXPECT_THROW(parse_config("dropout_rate=1\n"), ParameterError);
  EXPECT_THROW(parse_config("learning_rate=0\n"), ParameterError);
}

TEST(Evaluate, ZeroParamsPredictClassZero) {
  const ModelParams p = models::zero_params(small_spec(ArchKind::lstm), 4);
  std::vector<PhraseExample> data;
  for (int i = 0; i < 10; ++i) data.push_back({{1, 2}, i < 3 ? 0 : 4, corpus::coarse_from_fine(i < 3 ? 0 : 4)});
  EXPECT_DOUBLE_EQ(evaluate(p, data, EvalTask::fine), 0.3);
  // Equal negative and positive mass ties to negative.
  EXPECT_DOUBLE_EQ(evaluate(p, data, EvalTask::coarse), 0.3);
}

TEST(Evaluate, PermutationInvariantAndEmpty) {
  Rng rng(7);
  const ModelParams p = models::random_params(small_spec(ArchKind::rnn), 6, 1.0, rng);
  std::vector<PhraseExample> data;
  for (int i = 0; i < 40; ++i) {
    const int label = static_cast<int>(rng.below(5));
    data.push_back({{rng.below(6), rng.below(6), rng.below(6)}, label, corpus::coarse_from_fine(label)});
  }
  const double acc = evaluate(p, data, EvalTask::fine);
  std::reverse(data.begin(), data.end());
  EXPECT_EQ(evaluate(p, data, EvalTask::fine), acc);
  EXPECT_THROW(evaluate(p, std::vector<PhraseExample>{}, EvalTask::fine), DataError);
  const std::vector<PhraseExample> neutral = {{{1}, 2, std::nullopt}};
  EXPECT_THROW(evaluate(p, neutral, EvalTask::coarse), DataError);
}

TEST(Evaluate, PerfectPredictor) {
  // Two-class identity model: logit c = +/- x for a single token embedding.
  ArchSpec spec = small_spec(ArchKind::rnn, 2);
  spec.embed_dim = 1;
  spec.hidden_dim = 1;
  spec.activation = Activation::identity;
  ModelParams p = models::zero_params(spec, 6);
  p.embedding(4, 0) = -1.0;
  p.embedding(5, 0) = 1.0;
  const auto idx = models::weight_index(spec);
  p.weights[idx.rnn_layers[0].input](0, 0) = 1.0;
  p.weights[idx.classifier_weight] = Matrix{{-1.0}, {1.0}};
  const std::vector<PhraseExample> data = {{{4}, 0, 0}, {{5}, 4, 1}, {{5}, 3, 1}};
  EXPECT_EQ(evaluate(p, data, EvalTask::coarse), 1.0);
}

TEST(Train, ZeroEpochsReturnsInitialParams) {
  corpus::Vocab vocab;
  const auto data = synthetic(8, 20, vocab, true);
  TrainConfig cfg;
  cfg.max_epochs = 0;
  const TrainResult r = train_classifier(small_spec(ArchKind::lstm), cfg, data, data, vocab.size());
  EXPECT_TRUE(r.report.epochs.empty());
  EXPECT_FALSE(r.report.best_epoch);
  Rng init = Rng(cfg.seed).split(1);
  EXPECT_EQ(r.params, models::random_params(small_spec(ArchKind::lstm), vocab.size(), cfg.init_scale, init));
}

TEST(Train, RejectsEmptyCorpora) {
  corpus::Vocab vocab;
  const auto data = synthetic(9, 5, vocab, true);
  EXPECT_THROW(train_classifier(small_spec(ArchKind::rnn), TrainConfig{}, {}, data, vocab.size()), DataError);
  EXPECT_THROW(train_classifier(small_spec(ArchKind::rnn), TrainConfig{}, data, {}, vocab.size()), DataError);
}

TEST(Train, BitReproducibleAcrossThreadCounts) {
  corpus::Vocab vocab;
  const auto train = synthetic(10, 120, vocab, true);
  const auto dev = synthetic(11, 30, vocab, false);
  TrainConfig cfg;
  cfg.max_epochs = 3;
  cfg.batch_size = 16;
  cfg.embed_dim = 6;
  cfg.hidden_dim = 6;
  const ArchSpec spec = cfg.apply_to(small_spec(ArchKind::bilstm));
  ::setenv("NNVIZ_THREADS", "1", 1);
  const TrainResult a = train_classifier(spec, cfg, train, dev, vocab.size());
  ::setenv("NNVIZ_THREADS", "4", 1);
  const TrainResult b = train_classifier(spec, cfg, train, dev, vocab.size());
  ::unsetenv("NNVIZ_THREADS");
  EXPECT_EQ(a.report, b.report);
  EXPECT_EQ(a.params, b.params);
  ASSERT_EQ(a.report.epochs.size(), 3u);
  double best = 0.0;
  for (const auto& e : a.report.epochs) best = std::max(best, e.dev_accuracy);
  EXPECT_EQ(a.report.best_dev_accuracy, best);
}

TEST(Train, LstmLearnsSyntheticGrammar) {
  corpus::Vocab vocab;
  const auto train = synthetic(100, 2000, vocab, true);
  const auto dev = synthetic(101, 200, vocab, false);
  TrainConfig cfg;
  cfg.embed_dim = 16;
  cfg.hidden_dim = 16;
  cfg.max_epochs = 30;
  cfg.eval_task = EvalTask::coarse;
  const TrainResult r = train_classifier(cfg.apply_to(ArchSpec{}), cfg, train, dev, vocab.size());
  EXPECT_GE(r.report.best_dev_accuracy, 0.95);
}
