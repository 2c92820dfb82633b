#include "nnviz/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <optional>
#include <ostream>
#include <sstream>

#include "nnviz/checkpoint.hpp"
#include "nnviz/corpus.hpp"
#include "nnviz/errors.hpp"
#include "nnviz/interpret.hpp"
#include "nnviz/io.hpp"
#include "nnviz/models.hpp"
#include "nnviz/optim.hpp"
#include "nnviz/seq2seq.hpp"
#include "nnviz/text.hpp"
#include "nnviz/viz.hpp"

namespace nnviz::cli {

namespace {

using corpus::TokenId;

std::string join(const std::vector<std::string>& words, const char* sep = " ") {
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) out += sep;
    out += words[i];
  }
  return out;
}

std::string fixed(double v, int digits = 4) {
  std::ostringstream ss;
  ss.setf(std::ios::fixed);
  ss.precision(digits);
  ss << v;
  return ss.str();
}

// "out.svg" -> "out-3.svg" when several inputs share one output flag.
std::string indexed_path(const std::string& path, std::size_t index, std::size_t total) {
  if (total <= 1) return path;
  const std::size_t slash = path.find_last_of('/');
  const std::size_t dot = path.find_last_of('.');
  const std::string tag = "-" + std::to_string(index + 1);
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash)) return path + tag;
  return path.substr(0, dot) + tag + path.substr(dot);
}

std::vector<std::string> dim_labels(std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back("d" + std::to_string(i));
  return out;
}

// Column labels only while they stay legible.
std::vector<std::string> maybe_dim_labels(std::size_t n) { return n <= 16 ? dim_labels(n) : std::vector<std::string>{}; }

std::size_t argmax(std::span<const double> v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

// ---- shared option blocks --------------------------------------------------------

struct TrainOpts {
  std::string arch;
  std::string train_path;
  std::string dev_path;
  std::string config_path;
  std::string out_path;
  std::string report_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs;
  std::size_t classes = 5;
  std::string activation = "tanh";
  bool all_phrases = false;
};

struct EvalOpts {
  std::string model;
  std::string data;
  std::string task = "fine";
  bool all_phrases = false;
};

struct SaliencyOpts {
  std::string model;
  std::string input;
  std::string file;
  std::string target = "pred-logit";
  std::string agg = "mean_abs";
  std::optional<std::size_t> gold;
  std::string svg;
  std::string csv;
  bool is_signed = false;
};

struct VarianceOpts {
  std::string model;
  std::string input;
  std::string svg;
  std::string csv;
};

struct TsneOpts {
  std::string model;
  std::string phrases;
  std::string svg;
  std::string csv;
  double perplexity = 30.0;
  std::size_t iters = 1000;
  std::uint64_t seed = 1;
};

struct GradcheckOpts {
  std::string arch;
  std::uint64_t seed = 1;
  std::size_t configs = 20;
  double epsilon = 1e-5;
  double tolerance = 1e-4;
};

struct S2sTrainOpts {
  std::string data;
  std::string config_path;
  std::string out_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs;
};

struct S2sDecodeOpts {
  std::string model;
  std::string input;
  std::optional<std::size_t> max_len;
};

struct S2sSaliencyOpts {
  std::string model;
  std::string input;
  std::string svg_prefix;
  std::string csv_prefix;
};

struct SynthOpts {
  std::size_t n = 1000;
  std::uint64_t seed = 1;
  std::string out;
  std::string kind = "grammar";
  std::string format = "tsv";
};

// ---- commands ----------------------------------------------------------------------

int cmd_train(const TrainOpts& o, std::ostream& out, std::ostream& err) {
  optim::TrainConfig cfg = o.config_path.empty() ? optim::TrainConfig{} : optim::load_config(o.config_path);
  if (o.seed) cfg.seed = *o.seed;
  if (o.epochs) cfg.max_epochs = *o.epochs;
  cfg.validate();
  if (o.classes != 2 && o.classes != 5) throw ParameterError("--classes must be 2 or 5");

  models::ArchSpec spec;
  spec.kind = models::parse_arch(o.arch);
  spec.num_classes = o.classes;
  spec.activation = parse_activation(o.activation);
  spec = cfg.apply_to(spec);
  spec.validate();
  if (spec.num_classes == 2 && cfg.eval_task == optim::EvalTask::fine) {
    err << "note: a 2-class model is selected on coarse dev accuracy\n";
    cfg.eval_task = optim::EvalTask::coarse;
  }

  const auto train_phrases = corpus::load_labeled_file(o.train_path, o.all_phrases);
  const auto dev_phrases = corpus::load_labeled_file(o.dev_path, o.all_phrases);
  const corpus::Vocab vocab = corpus::build_vocab(train_phrases, cfg.min_count);
  const auto train = corpus::encode(vocab, train_phrases);
  const auto dev = corpus::encode(vocab, dev_phrases);

  err << "train: " << models::to_string(spec.kind) << " D=" << spec.embed_dim << " H=" << spec.hidden_dim
      << " C=" << spec.num_classes << " vocab=" << vocab.size() << " train=" << train.size() << " dev=" << dev.size()
      << " seed=" << cfg.seed << "\n";
  const optim::TrainResult result = optim::train_classifier(spec, cfg, train, dev, vocab.size());

  std::string report = "epoch\ttrain_loss\tdev_accuracy\n";
  for (std::size_t e = 0; e < result.report.epochs.size(); ++e) {
    const auto& s = result.report.epochs[e];
    err << "  epoch " << e + 1 << "  loss " << fixed(s.train_loss) << "  dev " << fixed(s.dev_accuracy) << "  "
        << fixed(s.seconds, 2) << "s\n";
    report += std::to_string(e + 1) + "\t" + format_double(s.train_loss) + "\t" + format_double(s.dev_accuracy) + "\n";
  }
  if (result.report.best_epoch) {
    err << "best dev accuracy " << fixed(result.report.best_dev_accuracy) << " at epoch "
        << *result.report.best_epoch + 1 << "\n";
  }

  StagedOutputs outputs;
  Checkpoint ckpt{result.params, cfg, vocab, creation_timestamp()};
  outputs.add(o.out_path, serialize_checkpoint(ckpt));
  if (!o.report_path.empty()) outputs.add(o.report_path, report);
  outputs.commit();
  out << "wrote " << o.out_path << "\n";
  return kOk;
}

int cmd_eval(const EvalOpts& o, std::ostream& out, std::ostream& err) {
  const Checkpoint ckpt = load_checkpoint(o.model);
  const auto& params = ckpt.classifier();
  const optim::EvalTask task = optim::parse_eval_task(o.task);
  const auto examples = corpus::encode(ckpt.vocab, corpus::load_labeled_file(o.data, o.all_phrases));
  const double acc = optim::evaluate(params, examples, task);
  err << "eval: " << examples.size() << " examples, task " << optim::to_string(task) << "\n";
  out << "accuracy " << format_double(acc) << "\n";
  return kOk;
}

std::vector<std::string> input_lines(const std::string& input, const std::string& file) {
  if (!input.empty() && !file.empty()) throw ParameterError("give either --input or --file, not both");
  if (input.empty() && file.empty()) throw ParameterError("one of --input or --file is required");
  std::vector<std::string> lines;
  if (!input.empty()) {
    lines.push_back(input);
  } else {
    std::istringstream ss(read_file(file));
    std::string line;
    while (std::getline(ss, line)) {
      if (!trim(line).empty()) lines.push_back(line);
    }
  }
  for (const auto& l : lines) {
    if (corpus::tokenize(l).empty()) throw DataError("input has no tokens");
  }
  if (lines.empty()) throw DataError("'" + file + "' has no non-empty lines");
  return lines;
}

int cmd_saliency(const SaliencyOpts& o, std::ostream& out, std::ostream& err) {
  const interpret::TargetKind kind = interpret::parse_target_kind(o.target);
  const interpret::Aggregation agg = interpret::parse_aggregation(o.agg);
  const auto lines = input_lines(o.input, o.file);
  const Checkpoint ckpt = load_checkpoint(o.model);
  const auto& params = ckpt.classifier();

  StagedOutputs outputs;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto words = corpus::tokenize(lines[i]);
    const auto ids = ckpt.vocab.encode(words);
    const models::Objective target = interpret::resolve_target(kind, params, ids, o.gold);
    const interpret::SaliencyMap map = interpret::embedding_saliency(params, ids, target, words);
    const interpret::TokenScores scores = interpret::aggregate_saliency(map, agg);

    out << "input: " << join(words) << "\n";
    out << "target " << interpret::describe(target) << "  score " << format_double(map.score) << "\n";
    for (std::size_t t = 0; t < words.size(); ++t) {
      out << "  " << words[t] << (ids[t] == corpus::kUnk ? " (unk)" : "") << "\t" << format_double(scores.scores[t])
          << "\n";
    }
    const std::size_t top = argmax(scores.scores.span());
    err << "saliency: most salient token '" << words[top] << "' (" << interpret::to_string(agg) << ")\n";

    const Matrix& shown = o.is_signed ? map.gradient : map.grid;
    if (!o.svg.empty()) {
      viz::HeatmapSpec spec;
      spec.matrix = shown;
      spec.row_labels = words;
      spec.col_labels = maybe_dim_labels(shown.cols());
      spec.palette = o.is_signed ? viz::Palette::diverging_blue_red : viz::Palette::sequential;
      spec.title = "saliency " + interpret::describe(target);
      outputs.add(indexed_path(o.svg, i, lines.size()), viz::render_svg(spec));
    }
    if (!o.csv.empty()) {
      outputs.add(indexed_path(o.csv, i, lines.size()), viz::export_matrix_csv(shown, words, "token"));
    }
  }
  outputs.commit();
  return kOk;
}

int cmd_variance(const VarianceOpts& o, std::ostream& out, std::ostream&) {
  if (o.input.empty()) throw ParameterError("--input is required");
  const Checkpoint ckpt = load_checkpoint(o.model);
  const auto& params = ckpt.classifier();
  const auto words = corpus::tokenize(o.input);
  if (words.empty()) throw DataError("input has no tokens");
  const auto ids = ckpt.vocab.encode(words);
  const Matrix grid = interpret::variance_salience(params, ids);
  const Vector scores = interpret::aggregate_rows(grid, interpret::Aggregation::mean_abs);
  out << "input: " << join(words) << "\n";
  for (std::size_t t = 0; t < words.size(); ++t) out << "  " << words[t] << "\t" << format_double(scores[t]) << "\n";

  StagedOutputs outputs;
  if (!o.svg.empty()) {
    viz::HeatmapSpec spec;
    spec.matrix = grid;
    spec.row_labels = words;
    spec.col_labels = maybe_dim_labels(grid.cols());
    spec.palette = viz::Palette::sequential;
    spec.title = "variance salience";
    outputs.add(o.svg, viz::render_svg(spec));
  }
  if (!o.csv.empty()) outputs.add(o.csv, viz::export_matrix_csv(grid, words, "token"));
  outputs.commit();
  return kOk;
}

// Lines are treebank trees, "label<TAB>text", or plain text (group -1).
struct PhraseLine {
  std::vector<std::string> words;
  int group = -1;
};

std::vector<PhraseLine> read_phrase_lines(const std::string& path) {
  const std::string text = read_file(path);
  std::vector<PhraseLine> out;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    const std::string_view line = trim(std::string_view(text).substr(start, end - start));
    if (!line.empty()) {
      try {
        if (line.front() == '(' || line.find('\t') != std::string_view::npos) {
          const auto parsed = corpus::parse_labeled_text(line, false);
          for (const auto& p : parsed) out.push_back({p.tokens, p.fine_label});
        } else {
          out.push_back({corpus::tokenize(line), -1});
        }
      } catch (const ParseError& e) {
        throw ParseError(std::string("phrases: ") + e.what(), start + e.offset());
      }
    }
    start = end + 1;
  }
  return out;
}

int cmd_tsne(const TsneOpts& o, std::ostream& out, std::ostream& err) {
  const Checkpoint ckpt = load_checkpoint(o.model);
  const auto& params = ckpt.classifier();
  const auto phrases = read_phrase_lines(o.phrases);
  if (phrases.empty()) throw DataError("'" + o.phrases + "' has no phrases");

  Matrix points(phrases.size(), params.spec.output_dim());
  std::vector<std::string> labels;
  std::vector<int> groups;
  for (std::size_t i = 0; i < phrases.size(); ++i) {
    const auto trace = models::forward(params, ckpt.vocab.encode(phrases[i].words));
    std::copy(trace.representation.begin(), trace.representation.end(), points.row(i).begin());
    labels.push_back(join(phrases[i].words));
    groups.push_back(phrases[i].group);
  }
  viz::TsneConfig cfg;
  cfg.perplexity = o.perplexity;
  cfg.iters = o.iters;
  cfg.seed = o.seed;
  const viz::TsneResult r = viz::tsne(points, cfg);
  err << "tsne: " << phrases.size() << " phrases, perplexity " << format_double(o.perplexity) << ", seed " << o.seed
      << ", KL " << fixed(r.initial_kl) << " -> " << fixed(r.final_kl) << "\n";
  out << "kl_initial " << format_double(r.initial_kl) << "\nkl_final " << format_double(r.final_kl) << "\n";

  StagedOutputs outputs;
  if (!o.svg.empty()) {
    viz::ScatterSpec spec;
    spec.points = r.embedding;
    spec.labels = labels;
    spec.groups = groups;
    spec.title = "t-SNE perplexity " + format_double(o.perplexity) + " seed " + std::to_string(o.seed);
    outputs.add(o.svg, viz::render_scatter_svg(spec));
  }
  if (!o.csv.empty()) outputs.add(o.csv, viz::export_matrix_csv(r.embedding, labels, "phrase"));
  outputs.commit();
  return kOk;
}

int cmd_gradcheck(const GradcheckOpts& o, std::ostream& out, std::ostream& err) {
  const auto cases = gradcheck_suite(o.arch, o.seed, o.configs, o.epsilon, o.tolerance);
  std::size_t failed = 0;
  double worst = 0.0;
  for (const auto& c : cases) {
    out << c.description << "  checked " << c.report.checked << "/" << c.report.total << "  max_rel_err "
        << format_double(c.report.max_relative_error) << (c.report.passed ? "  ok" : "  FAIL at " + c.report.worst_coordinate)
        << "\n";
    failed += c.report.passed ? 0 : 1;
    worst = std::max(worst, c.report.max_relative_error);
  }
  err << "gradcheck " << o.arch << ": " << cases.size() - failed << "/" << cases.size() << " passed, worst "
      << format_double(worst) << " (tolerance " << format_double(o.tolerance) << ", seed " << o.seed << ")\n";
  return failed == 0 ? kOk : kNumeric;
}

std::vector<std::vector<TokenId>> encode_sentences(const corpus::Vocab& vocab,
                                                   const std::vector<std::vector<std::string>>& sentences) {
  std::vector<std::vector<TokenId>> out;
  out.reserve(sentences.size());
  for (const auto& s : sentences) out.push_back(vocab.encode(s));
  return out;
}

int cmd_s2s_train(const S2sTrainOpts& o, std::ostream& out, std::ostream& err) {
  optim::TrainConfig cfg = o.config_path.empty() ? optim::TrainConfig{} : optim::load_config(o.config_path);
  if (o.seed) cfg.seed = *o.seed;
  if (o.epochs) cfg.max_epochs = *o.epochs;
  cfg.validate();
  const auto sentences = corpus::load_sentences(o.data);
  if (sentences.empty()) throw DataError("'" + o.data + "' has no sentences");
  std::vector<corpus::LabeledPhrase> as_phrases;
  for (const auto& s : sentences) as_phrases.push_back({s, 2});
  const corpus::Vocab vocab = corpus::build_vocab(as_phrases, cfg.min_count);
  const auto encoded = encode_sentences(vocab, sentences);

  err << "s2s-train: " << sentences.size() << " sentences, vocab " << vocab.size() << ", D=" << cfg.embed_dim
      << " H=" << cfg.hidden_dim << " seed=" << cfg.seed << "\n";
  const seq2seq::Seq2SeqResult r = seq2seq::train_seq2seq(cfg, encoded, vocab.size());
  for (std::size_t e = 0; e < r.report.epoch_loss.size(); ++e) {
    err << "  epoch " << e + 1 << "  loss " << fixed(r.report.epoch_loss[e]) << "\n";
  }
  const double recon = seq2seq::reconstruction_accuracy(r.params, encoded);
  err << "reconstruction accuracy " << fixed(recon) << "\n";

  StagedOutputs outputs;
  outputs.add(o.out_path, serialize_checkpoint(Checkpoint{r.params, cfg, vocab, creation_timestamp()}));
  outputs.commit();
  out << "wrote " << o.out_path << "\n";
  return kOk;
}

int cmd_s2s_decode(const S2sDecodeOpts& o, std::ostream& out, std::ostream&) {
  const Checkpoint ckpt = load_checkpoint(o.model);
  const auto& params = ckpt.seq2seq();
  const auto words = corpus::tokenize(o.input);
  if (words.empty()) throw DataError("input has no tokens");
  const auto ids = ckpt.vocab.encode(words);
  const std::size_t max_len = o.max_len.value_or(words.size() + 5);
  const auto decoded = seq2seq::greedy_decode(params, seq2seq::encode(params, ids), max_len);
  out << join(ckpt.vocab.decode(decoded)) << "\n";
  return kOk;
}

int cmd_s2s_saliency(const S2sSaliencyOpts& o, std::ostream& out, std::ostream& err) {
  if (o.svg_prefix.empty() && o.csv_prefix.empty()) throw ParameterError("--svg-prefix or --csv-prefix is required");
  const Checkpoint ckpt = load_checkpoint(o.model);
  const auto& params = ckpt.seq2seq();
  const auto words = corpus::tokenize(o.input);
  if (words.empty()) throw DataError("input has no tokens");
  const auto src = ckpt.vocab.encode(words);
  const auto tgt = seq2seq::autoencoder_target(src);

  std::vector<double> steps, mass;
  StagedOutputs outputs;
  out << "step\tpredicting\tlog_prob\tsource_mass\ttop_source\n";
  for (std::size_t step = 1; step < tgt.size(); ++step) {
    const seq2seq::StepSaliency s = seq2seq::decode_step_saliency(params, src, tgt, step, &ckpt.vocab);
    const std::size_t top = argmax(s.scores.span().subspan(0, s.source_length));
    out << step << "\t" << ckpt.vocab.token(tgt[step]) << "\t" << format_double(s.log_prob) << "\t"
        << format_double(s.source_mass_fraction()) << "\t" << s.tokens[top] << "\n";
    steps.push_back(static_cast<double>(step));
    mass.push_back(s.source_mass_fraction());
    const std::string suffix = "-step" + std::to_string(step);
    if (!o.svg_prefix.empty()) {
      viz::HeatmapSpec spec;
      spec.matrix = s.grid;
      spec.row_labels = s.tokens;
      spec.col_labels = maybe_dim_labels(s.grid.cols());
      spec.palette = viz::Palette::sequential;
      spec.title = "step " + std::to_string(step) + " predicting " + ckpt.vocab.token(tgt[step]);
      outputs.add(o.svg_prefix + suffix + ".svg", viz::render_svg(spec));
    }
    if (!o.csv_prefix.empty()) {
      outputs.add(o.csv_prefix + suffix + ".csv", viz::export_matrix_csv(s.grid, s.tokens, "token"));
    }
  }
  if (steps.size() >= 2) {
    err << "s2s-saliency: source mass vs step Spearman " << fixed(seq2seq::spearman(steps, mass)) << "\n";
  }
  outputs.commit();
  return kOk;
}

int cmd_synth(const SynthOpts& o, std::ostream& out, std::ostream& err) {
  Rng rng(o.seed);
  std::vector<corpus::LabeledPhrase> phrases;
  if (o.kind == "grammar") phrases = corpus::generate_synthetic_grammar(rng, o.n);
  else if (o.kind == "hate-love") phrases = corpus::generate_hate_love_sentences(rng, o.n);
  else throw ParameterError("unknown --kind '" + o.kind + "' (expected grammar or hate-love)");
  std::string text;
  if (o.format == "tsv") {
    text = corpus::to_tsv(phrases);
  } else if (o.format == "plain") {
    for (const auto& p : phrases) text += join(p.tokens) + "\n";
  } else {
    throw ParameterError("unknown --format '" + o.format + "' (expected tsv or plain)");
  }
  write_file_atomic(o.out, text);
  err << "synth: " << phrases.size() << " " << o.kind << " sentences, seed " << o.seed << "\n";
  out << "wrote " << o.out << "\n";
  return kOk;
}

}  // namespace

// ---- gradient check suite --------------------------------------------------------

std::vector<GradcheckCase> gradcheck_suite(const std::string& arch, std::uint64_t seed, std::size_t count,
                                           double epsilon, double tolerance) {
  constexpr std::size_t kVocab = 12;
  const bool s2s = arch == "seq2seq";
  const models::ArchKind kind = s2s ? models::ArchKind::lstm : models::parse_arch(arch);
  std::vector<GradcheckCase> out;
  const Rng root(seed);
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng = root.split(i);
    const std::size_t d = 1 + rng.below(8);
    const std::size_t h = 1 + rng.below(8);
    std::vector<TokenId> tokens(1 + rng.below(6));
    for (auto& t : tokens) t = corpus::kReservedCount + rng.below(kVocab - corpus::kReservedCount);
    std::ostringstream desc;
    desc << arch << " #" << i << " D=" << d << " H=" << h << " T=" << tokens.size();
    GradCheckReport report;
    if (s2s) {
      seq2seq::Seq2SeqSpec spec{kVocab, d, h};
      spec.lstm_output = rng.below(2) ? models::LstmOutput::tanh_cell : models::LstmOutput::raw_cell;
      const auto params = seq2seq::random_seq2seq(spec, 0.5, rng);
      desc << " " << models::to_string(spec.lstm_output) << " loss";
      report = seq2seq::check_seq2seq_gradients(params, tokens, seq2seq::autoencoder_target(tokens), epsilon,
                                                tolerance, seed + i);
    } else {
      models::ArchSpec spec;
      spec.kind = kind;
      spec.layers = kind == models::ArchKind::mlrnn ? 2 : 1;
      spec.embed_dim = d;
      spec.hidden_dim = h;
      spec.num_classes = rng.below(2) ? 5 : 2;
      spec.use_bias = rng.below(4) != 0;
      if (kind == models::ArchKind::rnn || kind == models::ArchKind::mlrnn) {
        spec.activation = rng.below(2) ? Activation::tanh : Activation::identity;
      } else {
        spec.lstm_output = rng.below(2) ? models::LstmOutput::tanh_cell : models::LstmOutput::raw_cell;
      }
      const auto params = models::random_params(spec, kVocab, 0.5, rng);
      const std::size_t cls = rng.below(spec.num_classes);
      const models::Objective obj =
          rng.below(2) ? models::Objective::logit(cls) : models::Objective::cross_entropy(cls);
      desc << " C=" << spec.num_classes << (spec.use_bias ? "" : " nobias") << " " << interpret::describe(obj);
      report = models::check_gradients(params, tokens, obj, epsilon, tolerance, {}, seed + i);
    }
    out.push_back({desc.str(), report});
  }
  return out;
}

// ---- entry point -----------------------------------------------------------------

int run(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err) {
  if (argv.empty()) throw ParameterError("run: argv must hold at least the program name");

  CLI::App app{"Recurrent sentiment models, gradient saliency and visualization"};
  app.name(argv[0]);
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  TrainOpts train;
  auto* c_train = app.add_subcommand("train", "Train a sentiment classifier and write a checkpoint");
  c_train->add_option("--arch", train.arch, "Architecture: rnn, mlrnn, lstm or bilstm")->required();
  c_train->add_option("--train", train.train_path, "Training data (treebank trees or label<TAB>text lines)")
      ->required();
  c_train->add_option("--dev", train.dev_path, "Development data used to pick the best epoch")->required();
  c_train->add_option("--config", train.config_path, "key=value training config file");
  c_train->add_option("--out", train.out_path, "Checkpoint path")->required();
  c_train->add_option("--report", train.report_path, "Optional per-epoch TSV report path");
  c_train->add_option("--seed", train.seed, "Override the config seed");
  c_train->add_option("--epochs", train.epochs, "Override max_epochs");
  c_train->add_option("--classes", train.classes, "Number of classes, 5 (fine) or 2 (coarse)")
      ->capture_default_str();
  c_train->add_option("--activation", train.activation, "rnn/mlrnn activation: tanh, sigmoid or identity")
      ->capture_default_str();
  c_train->add_flag("--all-phrases", train.all_phrases, "Use every treebank node as an example, not just roots");

  EvalOpts eval;
  auto* c_eval = app.add_subcommand("eval", "Report accuracy of a checkpoint on labeled data");
  c_eval->add_option("--model", eval.model, "Classifier checkpoint")->required();
  c_eval->add_option("--data", eval.data, "Labeled data (treebank or TSV)")->required();
  c_eval->add_option("--task", eval.task, "fine (5-way) or coarse (positive/negative)")->capture_default_str();
  c_eval->add_flag("--all-phrases", eval.all_phrases, "Score every treebank node, not just roots");

  SaliencyOpts sal;
  auto* c_sal = app.add_subcommand("saliency", "First-derivative saliency of a classifier decision");
  c_sal->add_option("--model", sal.model, "Classifier checkpoint")->required();
  c_sal->add_option("--input", sal.input, "Sentence to explain");
  c_sal->add_option("--file", sal.file, "File with one sentence per line (outputs get -N suffixes)");
  c_sal->add_option("--target", sal.target, "Differentiated score: gold-logit, pred-logit or loss")
      ->capture_default_str();
  c_sal->add_option("--gold", sal.gold, "Gold class, needed by gold-logit and loss");
  c_sal->add_option("--agg", sal.agg, "Per-token aggregation: mean_abs or l2")->capture_default_str();
  c_sal->add_option("--svg", sal.svg, "Heatmap SVG path");
  c_sal->add_option("--csv", sal.csv, "Grid CSV path");
  c_sal->add_flag("--signed", sal.is_signed, "Plot the signed gradient on a diverging palette");

  VarianceOpts var;
  auto* c_var = app.add_subcommand("variance", "Variance salience of a sentence's embeddings");
  c_var->add_option("--model", var.model, "Classifier checkpoint")->required();
  c_var->add_option("--input", var.input, "Sentence")->required();
  c_var->add_option("--svg", var.svg, "Heatmap SVG path");
  c_var->add_option("--csv", var.csv, "Grid CSV path");

  TsneOpts ts;
  auto* c_tsne = app.add_subcommand("tsne", "t-SNE projection of phrase representations");
  c_tsne->add_option("--model", ts.model, "Classifier checkpoint")->required();
  c_tsne->add_option("--phrases", ts.phrases, "Phrases: treebank, label<TAB>text or plain lines")->required();
  c_tsne->add_option("--svg", ts.svg, "Scatter SVG path");
  c_tsne->add_option("--csv", ts.csv, "2-D coordinates CSV path");
  c_tsne->add_option("--perplexity", ts.perplexity, "Target perplexity (needs more than 3x as many phrases)")
      ->capture_default_str();
  c_tsne->add_option("--iters", ts.iters, "Gradient descent iterations")->capture_default_str();
  c_tsne->add_option("--seed", ts.seed, "Initialization seed")->capture_default_str();

  GradcheckOpts gc;
  auto* c_gc = app.add_subcommand("gradcheck", "Check analytic gradients against finite differences");
  c_gc->add_option("--arch", gc.arch, "rnn, mlrnn, lstm, bilstm or seq2seq")->required();
  c_gc->add_option("--seed", gc.seed, "Seed for the random instances")->capture_default_str();
  c_gc->add_option("--configs", gc.configs, "Number of random instances")->capture_default_str();
  c_gc->add_option("--eps", gc.epsilon, "Central difference step")->capture_default_str();
  c_gc->add_option("--tol", gc.tolerance, "Maximum relative error")->capture_default_str();

  S2sTrainOpts s2t;
  auto* c_s2t = app.add_subcommand("s2s-train", "Train a sequence autoencoder");
  c_s2t->add_option("--data", s2t.data, "One sentence per line")->required();
  c_s2t->add_option("--config", s2t.config_path, "key=value training config file");
  c_s2t->add_option("--out", s2t.out_path, "Checkpoint path")->required();
  c_s2t->add_option("--seed", s2t.seed, "Override the config seed");
  c_s2t->add_option("--epochs", s2t.epochs, "Override max_epochs");

  S2sDecodeOpts s2d;
  auto* c_s2d = app.add_subcommand("s2s-decode", "Greedy reconstruction of a sentence");
  c_s2d->add_option("--model", s2d.model, "Seq2seq checkpoint")->required();
  c_s2d->add_option("--input", s2d.input, "Sentence")->required();
  c_s2d->add_option("--max-len", s2d.max_len, "Maximum output length (default: input length + 5)");

  S2sSaliencyOpts s2s;
  auto* c_s2s = app.add_subcommand("s2s-saliency", "Per-step saliency of the decoder's predictions");
  c_s2s->add_option("--model", s2s.model, "Seq2seq checkpoint")->required();
  c_s2s->add_option("--input", s2s.input, "Sentence")->required();
  c_s2s->add_option("--svg-prefix", s2s.svg_prefix, "Writes <prefix>-step<N>.svg per decoding step");
  c_s2s->add_option("--csv-prefix", s2s.csv_prefix, "Writes <prefix>-step<N>.csv per decoding step");

  SynthOpts syn;
  auto* c_syn = app.add_subcommand("synth", "Emit synthetic sentiment sentences");
  c_syn->add_option("--n", syn.n, "Number of sentences")->capture_default_str();
  c_syn->add_option("--seed", syn.seed, "Generator seed")->capture_default_str();
  c_syn->add_option("--out", syn.out, "Output path")->required();
  c_syn->add_option("--kind", syn.kind, "grammar or hate-love")->capture_default_str();
  c_syn->add_option("--format", syn.format, "tsv (label<TAB>text) or plain")->capture_default_str();

  std::vector<const char*> cargv;
  for (const auto& a : argv) cargv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(cargv.size()), cargv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*c_train) return cmd_train(train, out, err);
    if (*c_eval) return cmd_eval(eval, out, err);
    if (*c_sal) return cmd_saliency(sal, out, err);
    if (*c_var) return cmd_variance(var, out, err);
    if (*c_tsne) return cmd_tsne(ts, out, err);
    if (*c_gc) return cmd_gradcheck(gc, out, err);
    if (*c_s2t) return cmd_s2s_train(s2t, out, err);
    if (*c_s2d) return cmd_s2s_decode(s2d, out, err);
    if (*c_s2s) return cmd_s2s_saliency(s2s, out, err);
    if (*c_syn) return cmd_synth(syn, out, err);
  } catch (const ParameterError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << "\n";
    return kNumeric;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kData;
  } catch (const DimensionError& e) {
    err << "data error: " << e.what() << "\n";
    return kData;
  }
  err << app.help();
  return kUsage;
}

}  // namespace nnviz::cli
