#include <gtest/gtest.h>

#include <bit>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <sstream>

#include "nnviz/checkpoint.hpp"
#include "nnviz/cli.hpp"
#include "nnviz/errors.hpp"
#include "nnviz/io.hpp"
#include "nnviz/models.hpp"

using namespace nnviz;
using namespace nnviz::cli;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() /
            ("nnviz_cli_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "_" +
             ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  std::string operator/(const std::string& name) const { return (path_ / name).string(); }
  std::size_t file_count() const {
    return static_cast<std::size_t>(std::distance(fs::directory_iterator(path_), fs::directory_iterator{}));
  }

 private:
  fs::path path_;
};

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "nnviz");
  std::ostringstream out, err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

corpus::Vocab toy_vocab() { return corpus::Vocab({"the", "movie", "i", "hate", "love"}); }

Checkpoint toy_checkpoint(models::ArchKind kind, std::size_t d, std::uint64_t seed) {
  models::ArchSpec spec;
  spec.kind = kind;
  spec.layers = kind == models::ArchKind::mlrnn ? 2 : 1;
  spec.embed_dim = d;
  spec.hidden_dim = 7;
  Rng rng(seed);
  const corpus::Vocab vocab = toy_vocab();
  optim::TrainConfig cfg;
  cfg.embed_dim = d;
  cfg.hidden_dim = 7;
  return {models::random_params(spec, vocab.size(), 0.3, rng), cfg, vocab, "2026-01-01T00:00:00Z"};
}

}  // namespace

TEST(Checkpoint, RoundTripIsBitExactForEveryArchitecture) {
  for (auto kind : {models::ArchKind::rnn, models::ArchKind::mlrnn, models::ArchKind::lstm, models::ArchKind::bilstm}) {
    const Checkpoint c = toy_checkpoint(kind, 5, 11);
    const std::string bytes = serialize_checkpoint(c);
    const Checkpoint back = parse_checkpoint(bytes);
    EXPECT_EQ(back, c);
    EXPECT_EQ(serialize_checkpoint(back), bytes);
  }
}

TEST(Checkpoint, PreservesSpecialValuesAndNoBiasLayout) {
  Checkpoint c = toy_checkpoint(models::ArchKind::rnn, 3, 2);
  auto& p = std::get<0>(c.model);
  p.embedding(4, 0) = -0.0;
  p.embedding(4, 1) = 5e-324;
  p.embedding(4, 2) = 1.7976931348623157e308;
  const Checkpoint back = parse_checkpoint(serialize_checkpoint(c));
  EXPECT_TRUE(std::signbit(back.classifier().embedding(4, 0)));
  EXPECT_EQ(back.classifier().embedding(4, 1), 5e-324);
  EXPECT_EQ(back.classifier().embedding(4, 2), 1.7976931348623157e308);

  models::ArchSpec spec = p.spec;
  spec.use_bias = false;
  Rng rng(3);
  c.model = models::random_params(spec, 9, 0.2, rng);
  EXPECT_EQ(parse_checkpoint(serialize_checkpoint(c)), c);
}

TEST(Checkpoint, Seq2SeqRoundTrip) {
  Rng rng(5);
  seq2seq::Seq2SeqSpec spec{9, 3, 4};
  Checkpoint c{seq2seq::random_seq2seq(spec, 0.4, rng), {}, toy_vocab(), "t"};
  const Checkpoint back = parse_checkpoint(serialize_checkpoint(c));
  EXPECT_EQ(back, c);
  EXPECT_TRUE(back.is_seq2seq());
  EXPECT_THROW(back.classifier(), DataError);
}

TEST(Checkpoint, LogitsSurviveSaveAndLoadExactly) {
  // D = 60 model, "i hate the movie".
  TempDir dir;
  const Checkpoint c = toy_checkpoint(models::ArchKind::lstm, 60, 9);
  const auto ids = c.vocab.encode({"i", "hate", "the", "movie"});
  const Vector before = models::forward(c.classifier(), ids).logits;
  save_checkpoint(dir / "m.ckpt", c);
  const Vector after = models::forward(load_checkpoint(dir / "m.ckpt").classifier(), ids).logits;
  ASSERT_EQ(before.size(), after.size());
  for (std::size_t i = 0; i < before.size(); ++i) EXPECT_EQ(std::bit_cast<std::uint64_t>(before[i]),
                                                           std::bit_cast<std::uint64_t>(after[i]));
  EXPECT_EQ(dir.file_count(), 1u);
}

TEST(Checkpoint, RejectsCorruption) {
  const std::string good = serialize_checkpoint(toy_checkpoint(models::ArchKind::lstm, 4, 1));

  std::string bad_magic = good;
  bad_magic[0] = 'X';
  try {
    parse_checkpoint(bad_magic);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.offset(), 0u);
  }

  std::string future = good;
  future.replace(future.find("format 1"), 8, "format 2");
  try {
    parse_checkpoint(future);
    FAIL();
  } catch (const ParseError&) {
    FAIL() << "version mismatch must not be reported as a structural error";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("version 2"), std::string::npos);
  }

  // Every proper prefix is rejected, never silently accepted.
  for (std::size_t cut : {std::size_t{3}, std::size_t{20}, good.size() / 2, good.size() - 5, good.size() - 1}) {
    EXPECT_THROW(parse_checkpoint(good.substr(0, cut)), ParseError) << cut;
  }

  std::string shape = good;
  const std::size_t at = shape.find("tensor embedding 9 4");
  ASSERT_NE(at, std::string::npos);
  shape.replace(at, 20, "tensor embedding 9 5");
  try {
    parse_checkpoint(shape);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.offset(), at);
  }

  EXPECT_THROW(parse_checkpoint(good + "x"), ParseError);

  std::string vocab = good;
  vocab.replace(vocab.find("\nmovie\n"), 7, "\nmovif\n");
  EXPECT_THROW(parse_checkpoint(vocab), ParseError);
}

TEST(Checkpoint, LoadMissingFileIsDataError) { EXPECT_THROW(load_checkpoint("/nonexistent/x.ckpt"), DataError); }

TEST(StagedOutputs, NothingAppearsWithoutCommit) {
  TempDir dir;
  {
    StagedOutputs o;
    o.add(dir / "a.txt", "a");
    o.add(dir / "b.txt", "b");
    EXPECT_THROW(o.add(dir / "a.txt", "again"), ParameterError);
    EXPECT_FALSE(fs::exists(dir / "a.txt"));
  }
  EXPECT_EQ(dir.file_count(), 0u);
  StagedOutputs o;
  o.add(dir / "a.txt", "a");
  o.commit();
  EXPECT_EQ(read_file(dir / "a.txt"), "a");
  EXPECT_EQ(dir.file_count(), 1u);
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(invoke({}).code, kUsage);
  EXPECT_EQ(invoke({"frobnicate"}).code, kUsage);
  EXPECT_EQ(invoke({"gradcheck", "--arch", "lstm", "--bogus"}).code, kUsage);
  EXPECT_EQ(invoke({"gradcheck", "--arch", "gru"}).code, kUsage);
}

TEST(Cli, SaliencyWithoutModelWritesNothing) {
  TempDir dir;
  const Outcome r = invoke({"saliency", "--input", "i hate it", "--svg", dir / "s.svg", "--csv", dir / "s.csv"});
  EXPECT_EQ(r.code, kUsage);
  EXPECT_EQ(dir.file_count(), 0u);
}

TEST(Cli, FailureAfterStagingLeavesNoFiles) {
  TempDir dir;
  save_checkpoint(dir / "m.ckpt", toy_checkpoint(models::ArchKind::lstm, 4, 1));
  // Both outputs name the same path: the heatmap is staged, then the CSV is refused.
  write_file_atomic(dir / "in.txt", "i love the movie\nthe movie\n");
  const Outcome r = invoke({"saliency", "--model", dir / "m.ckpt", "--file", dir / "in.txt", "--svg", dir / "s.out",
                            "--csv", dir / "s.out"});
  EXPECT_EQ(r.code, kUsage) << r.err;
  EXPECT_EQ(dir.file_count(), 2u);
}

TEST(Cli, HelpOnEverySubcommandDocumentsItsFlags) {
  const std::vector<std::pair<std::string, std::vector<std::string>>> commands = {
      {"train", {"--arch", "--train", "--dev", "--config", "--out", "--seed"}},
      {"eval", {"--model", "--data", "--task"}},
      {"saliency", {"--model", "--input", "--file", "--target", "--agg", "--svg", "--csv"}},
      {"variance", {"--model", "--input", "--svg", "--csv"}},
      {"tsne", {"--model", "--phrases", "--svg", "--csv", "--perplexity"}},
      {"gradcheck", {"--arch", "--seed"}},
      {"s2s-train", {"--data", "--out"}},
      {"s2s-decode", {"--model", "--input"}},
      {"s2s-saliency", {"--model", "--input", "--svg-prefix"}},
      {"synth", {"--n", "--seed", "--out"}},
  };
  for (const auto& [cmd, flags] : commands) {
    const Outcome r = invoke({cmd, "--help"});
    EXPECT_EQ(r.code, kOk) << cmd;
    for (const auto& f : flags) EXPECT_NE(r.out.find(f), std::string::npos) << cmd << " " << f;
  }
  EXPECT_EQ(invoke({"--help"}).code, kOk);
}

TEST(Cli, GradcheckLstmPasses) {
  const Outcome r = invoke({"gradcheck", "--arch", "lstm"});
  EXPECT_EQ(r.code, kOk) << r.out;
  EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 20);
  EXPECT_EQ(r.out.find("FAIL"), std::string::npos);
}

TEST(Cli, GradcheckSuiteIsSeeded) {
  const auto a = gradcheck_suite("bilstm", 3, 4, 1e-5, 1e-4);
  const auto b = gradcheck_suite("bilstm", 3, 4, 1e-5, 1e-4);
  ASSERT_EQ(a.size(), 4u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].description, b[i].description);
    EXPECT_EQ(a[i].report.max_relative_error, b[i].report.max_relative_error);
  }
}

TEST(Cli, EndToEndWorkflow) {
  TempDir dir;
  ::setenv("NNVIZ_TIMESTAMP", "fixed", 1);
  ASSERT_EQ(invoke({"synth", "--n", "300", "--seed", "4", "--out", dir / "train.tsv"}).code, kOk);
  ASSERT_EQ(invoke({"synth", "--n", "60", "--seed", "5", "--out", dir / "dev.tsv"}).code, kOk);
  write_file_atomic(dir / "cfg.txt", "embed_dim=8\nhidden_dim=8\nmax_epochs=3\nbatch_size=16\n");
  std::vector<std::string> train = {"train", "--arch", "lstm", "--train", dir / "train.tsv", "--dev", dir / "dev.tsv",
                                    "--config", dir / "cfg.txt", "--out", dir / "a.ckpt", "--seed", "2"};
  Outcome r = invoke(train);
  ASSERT_EQ(r.code, kOk) << r.err;
  train[10] = dir / "b.ckpt";
  ASSERT_EQ(invoke(train).code, kOk);
  EXPECT_EQ(read_file(dir / "a.ckpt"), read_file(dir / "b.ckpt"));
  EXPECT_EQ(load_checkpoint(dir / "a.ckpt").created, "fixed");

  r = invoke({"eval", "--model", dir / "a.ckpt", "--data", dir / "dev.tsv", "--task", "coarse"});
  EXPECT_EQ(r.code, kOk) << r.err;
  EXPECT_EQ(r.out.rfind("accuracy ", 0), 0u);

  r = invoke({"saliency", "--model", dir / "a.ckpt", "--input", "i hate the movie", "--svg", dir / "s.svg", "--csv",
              dir / "s.csv"});
  EXPECT_EQ(r.code, kOk) << r.err;
  EXPECT_NE(read_file(dir / "s.svg").find("<svg"), std::string::npos);
  EXPECT_EQ(read_file(dir / "s.csv").rfind("token,dim_0", 0), 0u);

  r = invoke({"variance", "--model", dir / "a.ckpt", "--input", "i hate the movie", "--csv", dir / "v.csv"});
  EXPECT_EQ(r.code, kOk) << r.err;

  r = invoke({"tsne", "--model", dir / "a.ckpt", "--phrases", dir / "dev.tsv", "--perplexity", "5", "--iters", "200",
              "--svg", dir / "t.svg", "--csv", dir / "t.csv"});
  EXPECT_EQ(r.code, kOk) << r.err;

  // A classifier checkpoint is the wrong kind for the seq2seq commands.
  r = invoke({"s2s-decode", "--model", dir / "a.ckpt", "--input", "i hate it"});
  EXPECT_EQ(r.code, kData);
  ::unsetenv("NNVIZ_TIMESTAMP");
}

TEST(Cli, Seq2SeqWorkflow) {
  TempDir dir;
  ASSERT_EQ(invoke({"synth", "--n", "20", "--seed", "1", "--format", "plain", "--out", dir / "s.txt"}).code, kOk);
  write_file_atomic(dir / "cfg.txt", "embed_dim=6\nhidden_dim=8\nmax_epochs=2\nbatch_size=5\n");
  Outcome r = invoke({"s2s-train", "--data", dir / "s.txt", "--config", dir / "cfg.txt", "--out", dir / "s.ckpt"});
  ASSERT_EQ(r.code, kOk) << r.err;
  r = invoke({"s2s-decode", "--model", dir / "s.ckpt", "--input", "i love the movie", "--max-len", "4"});
  EXPECT_EQ(r.code, kOk) << r.err;
  r = invoke({"s2s-saliency", "--model", dir / "s.ckpt", "--input", "i love it", "--svg-prefix", dir / "step"});
  EXPECT_EQ(r.code, kOk) << r.err;
  for (int step = 1; step <= 4; ++step) EXPECT_TRUE(fs::exists(dir / ("step-step" + std::to_string(step) + ".svg")));
}

TEST(Cli, ExitCodesByErrorKind) {
  TempDir dir;
  EXPECT_EQ(invoke({"eval", "--model", dir / "missing.ckpt", "--data", dir / "x"}).code, kData);
  write_file_atomic(dir / "junk.ckpt", "NNVIZ0\n");
  EXPECT_EQ(invoke({"eval", "--model", dir / "junk.ckpt", "--data", dir / "x"}).code, kData);
  write_file_atomic(dir / "cfg.txt", "learning_rat=1\n");
  write_file_atomic(dir / "d.tsv", "1\tbad\n");
  EXPECT_EQ(invoke({"train", "--arch", "rnn", "--train", dir / "d.tsv", "--dev", dir / "d.tsv", "--config",
                    dir / "cfg.txt", "--out", dir / "o.ckpt"})
                .code,
            kData);
  EXPECT_EQ(invoke({"synth", "--n", "5", "--kind", "poems", "--out", dir / "p"}).code, kUsage);
  EXPECT_FALSE(fs::exists(dir / "o.ckpt"));
}
