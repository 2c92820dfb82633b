#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <tuple>

#include "nnviz/corpus.hpp"
#include "nnviz/errors.hpp"

using namespace nnviz;
using namespace nnviz::corpus;

namespace {

SentimentTree random_tree(Rng& rng, int depth) {
  SentimentTree t;
  t.label = static_cast<int>(rng.below(5));
  if (depth == 0 || rng.uniform() < 0.3) {
    static const char* words[] = {"a", "film", "not", "good", "'s", "-lrb-", "it", "very"};
    t.token = words[rng.below(8)];
    return t;
  }
  t.children.push_back(random_tree(rng, depth - 1));
  t.children.push_back(random_tree(rng, depth - 1));
  return t;
}

std::vector<LabeledPhrase> phrases_of(std::initializer_list<std::vector<std::string>> sentences) {
  std::vector<LabeledPhrase> out;
  for (const auto& s : sentences) out.push_back({s, 3});
  return out;
}

}  // namespace

TEST(ParseTree, SingleLeaf) {
  const SentimentTree t = parse_ptb_tree("(2 hello)");
  EXPECT_TRUE(t.is_leaf());
  EXPECT_EQ(t.label, 2);
  EXPECT_EQ(t.token, "hello");
}

TEST(ParseTree, ThreeLeafTree) {
  const SentimentTree t = parse_ptb_tree("(3 (2 It) (3 (2 's) (3 good)))");
  EXPECT_EQ(t.label, 3);
  ASSERT_EQ(t.children.size(), 2u);
  EXPECT_EQ(t.children[0].token, "it");  // lowercased
  EXPECT_EQ(t.children[1].label, 3);
  EXPECT_EQ(t.children[1].children[0].token, "'s");
  EXPECT_EQ(t.children[1].children[1].token, "good");
  EXPECT_EQ(t.leaves(), (std::vector<std::string>{"it", "'s", "good"}));
  EXPECT_EQ(t.node_count(), 5u);
}

TEST(ParseTree, UnbalancedReportsEndOfInput) {
  const std::string line = "(3 (2 It)";
  try {
    parse_ptb_tree(line);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.offset(), line.size());
  }
}

TEST(ParseTree, MalformedInputs) {
  EXPECT_THROW(parse_ptb_tree("(x hello)"), ParseError);
  EXPECT_THROW(parse_ptb_tree("(7 hello)"), ParseError);
  EXPECT_THROW(parse_ptb_tree("()"), ParseError);
  EXPECT_THROW(parse_ptb_tree("(2 )"), ParseError);
  EXPECT_THROW(parse_ptb_tree("(2 (1 a))"), ParseError);
  EXPECT_THROW(parse_ptb_tree("(2 a) junk"), ParseError);
  try {
    parse_ptb_tree("(2 (1 a) (x b))");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.offset(), 10u);
  }
}

TEST(ParseTree, SerializeRoundTripOnRandomTrees) {
  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    const SentimentTree t = random_tree(rng, 5);
    EXPECT_EQ(parse_ptb_tree(serialize_tree(t)), t);
  }
}

TEST(ExtractPhrases, SingleNode) {
  const auto phrases = extract_phrases(parse_ptb_tree("(2 hello)"));
  ASSERT_EQ(phrases.size(), 1u);
  EXPECT_EQ(phrases[0], (LabeledPhrase{{"hello"}, 2}));
}

TEST(ExtractPhrases, OnePerNodeRootFirst) {
  const auto phrases = extract_phrases(parse_ptb_tree("(3 (2 It) (3 (2 's) (3 good)))"));
  ASSERT_EQ(phrases.size(), 5u);
  EXPECT_EQ(phrases[0].tokens, (std::vector<std::string>{"it", "'s", "good"}));
  EXPECT_EQ(phrases[0].fine_label, 3);
  EXPECT_EQ(phrases[2].tokens, (std::vector<std::string>{"'s", "good"}));
}

TEST(ExtractPhrases, CountMatchesBruteForceNodeCounter) {
  Rng rng(6);
  for (int i = 0; i < 100; ++i) {
    const SentimentTree t = random_tree(rng, 6);
    const std::string text = serialize_tree(t);
    // Every node opens exactly one parenthesis.
    const auto nodes = static_cast<std::size_t>(std::count(text.begin(), text.end(), '('));
    EXPECT_EQ(extract_phrases(t).size(), nodes);
  }
}

TEST(Coarse, NeutralExcluded) {
  EXPECT_EQ(coarse_from_fine(0), 0);
  EXPECT_EQ(coarse_from_fine(1), 0);
  EXPECT_FALSE(coarse_from_fine(2).has_value());
  EXPECT_EQ(coarse_from_fine(3), 1);
  EXPECT_EQ(coarse_from_fine(4), 1);
  const auto examples = encode(Vocab(), {{{"x"}, 2}, {{"y"}, 4}});
  EXPECT_FALSE(examples[0].coarse_label.has_value());
  EXPECT_EQ(examples[1].coarse_label, 1);
}

TEST(BuildVocab, AllRareTokensBecomeUnknown) {
  const Vocab v = build_vocab(phrases_of({{"a", "b"}, {"c"}}), 2);
  EXPECT_EQ(v.size(), kReservedCount);
  EXPECT_EQ(v.id("a"), kUnk);
}

TEST(BuildVocab, NoFilteringKeepsEveryDistinctToken) {
  const Vocab v = build_vocab(phrases_of({{"a", "b", "a"}, {"c", "b"}}), 1);
  EXPECT_EQ(v.size(), kReservedCount + 3);
}

TEST(BuildVocab, OrderMatchesSortOracle) {
  Rng rng(10);
  static const char* words[] = {"pear", "apple", "fig", "kiwi", "date", "lime", "plum"};
  std::vector<LabeledPhrase> phrases;
  for (int i = 0; i < 40; ++i) {
    LabeledPhrase p;
    for (std::uint64_t k = 0, n = 1 + rng.below(6); k < n; ++k) p.tokens.emplace_back(words[rng.below(7)]);
    phrases.push_back(p);
  }
  // Oracle: count naively, sort by (-count, token).
  std::map<std::string, int> counts;
  for (const auto& p : phrases)
    for (const auto& t : p.tokens) counts[t]++;
  std::vector<std::tuple<int, std::string>> keyed;
  for (const auto& [t, c] : counts) keyed.emplace_back(-c, t);
  std::sort(keyed.begin(), keyed.end());

  const Vocab v = build_vocab(phrases, 1);
  ASSERT_EQ(v.size(), kReservedCount + keyed.size());
  for (std::size_t i = 0; i < keyed.size(); ++i) EXPECT_EQ(v.token(kReservedCount + i), std::get<1>(keyed[i]));
  EXPECT_EQ(build_vocab(phrases, 1), v);
}

TEST(BuildVocab, Errors) {
  EXPECT_THROW(build_vocab({}, 1), DataError);
  EXPECT_THROW(build_vocab(phrases_of({{"a"}}), 0), ParameterError);
}

TEST(Vocab, ReservedIdsAndFileFormat) {
  const Vocab v({"the", "movie"});
  EXPECT_EQ(v.id("<pad>"), kPad);
  EXPECT_EQ(v.id("<eos>"), kEos);
  EXPECT_EQ(v.id("movie"), 5u);
  EXPECT_EQ(v.serialize(), "the\nmovie\n");
  EXPECT_EQ(Vocab::deserialize(v.serialize()), v);
  EXPECT_THROW(Vocab::deserialize("a\n\nb\n"), ParseError);
}

TEST(Encode, EveryIdBelowVocabSize) {
  Rng rng(3);
  const auto phrases = generate_synthetic_grammar(rng, 300);
  const Vocab v = build_vocab(phrases, 2);
  for (const auto& e : encode(v, phrases))
    for (TokenId id : e.tokens) EXPECT_LT(id, v.size());
}

TEST(MakeBatches, Sizes) {
  Rng rng(1);
  const auto batches = make_batches(10, 3, rng);
  ASSERT_EQ(batches.size(), 4u);
  EXPECT_EQ(batches[0].size(), 3u);
  EXPECT_EQ(batches[1].size(), 3u);
  EXPECT_EQ(batches[2].size(), 3u);
  EXPECT_EQ(batches[3].size(), 1u);
}

TEST(MakeBatches, DeterministicPerSeed) {
  Rng a(9), b(9);
  EXPECT_EQ(make_batches(57, 8, a), make_batches(57, 8, b));
}

TEST(MakeBatches, EveryExampleExactlyOnce) {
  Rng rng(2);
  for (std::size_t n : {1u, 7u, 64u, 101u}) {
    const auto batches = make_batches(n, 5, rng);
    std::multiset<std::size_t> seen;
    for (const auto& b : batches) seen.insert(b.begin(), b.end());
    std::multiset<std::size_t> expected;
    for (std::size_t i = 0; i < n; ++i) expected.insert(i);
    EXPECT_EQ(seen, expected);
  }
  EXPECT_THROW(make_batches(3, 0, rng), ParameterError);
}

TEST(SyntheticGrammar, LabelingRule) {
  EXPECT_EQ(label_from_value(clause_value(word_polarity("like"), false, false)), 3);  // "i like the movie"
  EXPECT_EQ(clause_value(word_polarity("good"), false, true), -1);                   // "not good"
  EXPECT_EQ(clause_value(word_polarity("bad"), false, true), 1);
  EXPECT_EQ(clause_value(word_polarity("good"), true, false), 2);   // "very good"
  EXPECT_EQ(clause_value(word_polarity("good"), true, true), -1);   // "not very good"
  EXPECT_EQ(clause_value(word_polarity("terrible"), false, false), -2);
}

TEST(SyntheticGrammar, NegationFlipsPolarity) {
  for (const char* w : {"good", "great", "bad", "terrible", "like", "love", "hate", "dislike"}) {
    const int base = word_polarity(w);
    EXPECT_EQ(clause_value(base, false, true) > 0, base < 0) << w;
  }
}

TEST(SyntheticGrammar, Replayable) {
  Rng a(11), b(11);
  EXPECT_EQ(generate_synthetic_grammar(a, 100), generate_synthetic_grammar(b, 100));
}

// Re-derives each generated label from its surface form.
TEST(SyntheticGrammar, LabelsAgreeWithIndependentReparse) {
  Rng rng(12);
  for (const auto& p : generate_synthetic_grammar(rng, 500)) {
    auto begin = p.tokens.begin();
    const auto though = std::find(p.tokens.begin(), p.tokens.end(), "though");
    if (though != p.tokens.end()) begin = though + 1;
    int base = 0;
    bool negated = false, intensified = false;
    for (auto it = begin; it != p.tokens.end(); ++it) {
      if (*it == "not" || *it == "n't") negated = true;
      if (*it == "very" || *it == "incredibly" || *it == "so") intensified = true;
      if (word_polarity(*it) != 0) base = word_polarity(*it);
    }
    ASSERT_NE(base, 0);
    int value = base;
    if (intensified) value = value > 0 ? 2 : -2;
    if (negated) value = value > 0 ? -1 : 1;
    EXPECT_EQ(p.fine_label, value + 2);
    EXPECT_NE(p.fine_label, 2);
  }
}

TEST(LabeledText, TreebankAndTsv) {
  const auto trees = parse_labeled_text("(3 (2 It) (3 (2 's) (3 good)))\n(1 bad)\n", true);
  EXPECT_EQ(trees.size(), 6u);
  const auto roots = parse_labeled_text("(3 (2 It) (3 (2 's) (3 good)))\n(1 bad)\n", false);
  EXPECT_EQ(roots.size(), 2u);
  const auto tsv = parse_labeled_text("4\tI Love it\n0\tawful\n", false);
  ASSERT_EQ(tsv.size(), 2u);
  EXPECT_EQ(tsv[0], (LabeledPhrase{{"i", "love", "it"}, 4}));
  EXPECT_EQ(parse_labeled_text(to_tsv(tsv), false), tsv);
  EXPECT_THROW(parse_labeled_text("9\tx\n", false), ParseError);
  EXPECT_THROW(parse_labeled_text("3 no tab\n", false), ParseError);
}
