#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "nnviz/linalg.hpp"

namespace nnviz::corpus {

using TokenId = std::size_t;

inline constexpr TokenId kPad = 0;
inline constexpr TokenId kUnk = 1;
inline constexpr TokenId kBos = 2;
inline constexpr TokenId kEos = 3;
inline constexpr std::size_t kReservedCount = 4;

class Vocab {
 public:
  // Reserved tokens only.
  Vocab();
  // `tokens` are the non-reserved entries in id order (id = index + 4).
  explicit Vocab(const std::vector<std::string>& tokens);

  std::size_t size() const noexcept { return id_to_token_.size(); }
  // Unknown tokens map to kUnk.
  TokenId id(std::string_view token) const;
  bool contains(std::string_view token) const;
  const std::string& token(TokenId id) const;
  const std::vector<std::string>& tokens() const noexcept { return id_to_token_; }

  std::vector<TokenId> encode(const std::vector<std::string>& tokens) const;
  std::vector<std::string> decode(const std::vector<TokenId>& ids) const;

  // One token per line, line i holds id i + 4.
  std::string serialize() const;
  static Vocab deserialize(std::string_view text);

  // FNV-1a over the serialized form.
  std::uint64_t hash() const;

  friend bool operator==(const Vocab& a, const Vocab& b) { return a.id_to_token_ == b.id_to_token_; }

 private:
  std::vector<std::string> id_to_token_;
  std::unordered_map<std::string, TokenId> token_to_id_;
};

// Surface-level labeled phrase, before vocabulary encoding.
struct LabeledPhrase {
  std::vector<std::string> tokens;
  int fine_label = 2;

  friend bool operator==(const LabeledPhrase&, const LabeledPhrase&) = default;
};

struct PhraseExample {
  std::vector<TokenId> tokens;
  int fine_label = 2;
  // Absent for neutral (fine label 2).
  std::optional<int> coarse_label;

  friend bool operator==(const PhraseExample&, const PhraseExample&) = default;
};

// {0,1} -> 0 (negative), {3,4} -> 1 (positive), 2 -> none.
std::optional<int> coarse_from_fine(int fine_label);

struct SentimentTree {
  int label = 2;
  std::string token;                   // leaves only
  std::vector<SentimentTree> children;  // 0 or 2

  bool is_leaf() const noexcept { return children.empty(); }
  std::size_t node_count() const;
  std::vector<std::string> leaves() const;

  friend bool operator==(const SentimentTree&, const SentimentTree&) = default;
};

// Parses one "(label ...)" s-expression. Leaf tokens are lowercased.
// Throws ParseError with the byte offset of the problem.
SentimentTree parse_ptb_tree(std::string_view line);
std::string serialize_tree(const SentimentTree& tree);

// One phrase per node in pre-order (root first).
std::vector<LabeledPhrase> extract_phrases(const SentimentTree& tree);

// Frequency-descending, ties lexicographic; tokens rarer than min_count become <unk>.
Vocab build_vocab(const std::vector<LabeledPhrase>& phrases, int min_count);

std::vector<PhraseExample> encode(const Vocab& vocab, const std::vector<LabeledPhrase>& phrases);

// Seeded shuffle into consecutive batches of example indices; the last batch may be short.
std::vector<std::vector<std::size_t>> make_batches(std::size_t example_count, std::size_t batch_size, Rng& rng);

// Lowercase, split on whitespace.
std::vector<std::string> tokenize(std::string_view text);

// Reads either treebank lines ("(3 ...)") or TSV lines ("label<TAB>tokens").
// With `all_phrases`, every treebank node becomes an example; otherwise roots only.
std::vector<LabeledPhrase> load_labeled_file(const std::string& path, bool all_phrases);
std::vector<LabeledPhrase> parse_labeled_text(std::string_view text, bool all_phrases);
std::string to_tsv(const std::vector<LabeledPhrase>& phrases);

// Plain one-sentence-per-line corpus.
std::vector<std::vector<std::string>> load_sentences(const std::string& path);

// ---- Synthetic sentiment grammar ---------------------------------------------
//
// Clause value v in {-2,-1,1,2}; label = v + 2.
//   * sentiment words carry a base value: love/great +2, like/good/interesting +1,
//     dislike/bad/boring -1, hate/terrible -2;
//   * an intensifier (very, incredibly, so) sharpens to magnitude 2;
//   * a negator (not, n't) flips the sign and caps the magnitude at 1,
//     applied after intensification ("not very good" -> -1);
//   * "A though B" takes the label of clause B.
// Neutral filler never changes the value.

int word_polarity(std::string_view word);  // 0 for non-sentiment words
int clause_value(int base, bool intensified, bool negated);
int label_from_value(int value);

bool is_sentiment_word(std::string_view word);

std::vector<LabeledPhrase> generate_synthetic_grammar(Rng& rng, std::size_t n);

// Single-clause "<subject> hate|love the <noun> [tail]" sentences.
std::vector<LabeledPhrase> generate_hate_love_sentences(Rng& rng, std::size_t n);

}  // namespace nnviz::corpus
