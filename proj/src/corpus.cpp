#include "nnviz/corpus.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>

#include "nnviz/errors.hpp"
#include "nnviz/io.hpp"

namespace nnviz::corpus {

namespace {

const std::array<std::string, kReservedCount> kReserved = {"<pad>", "<unk>", "<bos>", "<eos>"};

std::string lowercase(std::string_view text) {
  std::string out(text);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

}  // namespace

Vocab::Vocab() : Vocab(std::vector<std::string>{}) {}

Vocab::Vocab(const std::vector<std::string>& tokens) {
  id_to_token_.assign(kReserved.begin(), kReserved.end());
  for (TokenId i = 0; i < kReservedCount; ++i) token_to_id_.emplace(id_to_token_[i], i);
  for (const auto& t : tokens) {
    if (t.empty()) throw DataError("vocab: empty token");
    if (!token_to_id_.emplace(t, id_to_token_.size()).second) throw DataError("vocab: duplicate token '" + t + "'");
    id_to_token_.push_back(t);
  }
}

TokenId Vocab::id(std::string_view token) const {
  const auto it = token_to_id_.find(std::string(token));
  return it == token_to_id_.end() ? kUnk : it->second;
}

bool Vocab::contains(std::string_view token) const { return token_to_id_.count(std::string(token)) != 0; }

const std::string& Vocab::token(TokenId id) const {
  if (id >= id_to_token_.size()) throw DataError("vocab: id " + std::to_string(id) + " out of range");
  return id_to_token_[id];
}

std::vector<TokenId> Vocab::encode(const std::vector<std::string>& tokens) const {
  std::vector<TokenId> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(id(t));
  return ids;
}

std::vector<std::string> Vocab::decode(const std::vector<TokenId>& ids) const {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (TokenId i : ids) out.push_back(token(i));
  return out;
}

std::string Vocab::serialize() const {
  std::string out;
  for (std::size_t i = kReservedCount; i < id_to_token_.size(); ++i) {
    out += id_to_token_[i];
    out += '\n';
  }
  return out;
}

Vocab Vocab::deserialize(std::string_view text) {
  std::vector<std::string> tokens;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) throw ParseError("vocab: empty line", start);
    tokens.emplace_back(line);
    start = end + 1;
  }
  return Vocab(tokens);
}

std::uint64_t Vocab::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : serialize()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::optional<int> coarse_from_fine(int fine_label) {
  if (fine_label < 0 || fine_label > 4) throw DataError("fine label out of range: " + std::to_string(fine_label));
  if (fine_label == 2) return std::nullopt;
  return fine_label > 2 ? 1 : 0;
}

std::size_t SentimentTree::node_count() const {
  std::size_t n = 1;
  for (const auto& c : children) n += c.node_count();
  return n;
}

std::vector<std::string> SentimentTree::leaves() const {
  if (is_leaf()) return {token};
  std::vector<std::string> out;
  for (const auto& c : children) {
    auto sub = c.leaves();
    out.insert(out.end(), sub.begin(), sub.end());
  }
  return out;
}

namespace {

class TreeParser {
 public:
  explicit TreeParser(std::string_view text) : text_(text) {}

  SentimentTree parse() {
    skip_space();
    SentimentTree tree = parse_node();
    skip_space();
    if (pos_ != text_.size()) fail("trailing characters after tree");
    return tree;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const { throw ParseError("treebank: " + what, pos_); }

  void skip_space() {
    while (pos_ < text_.size() && is_space(text_[pos_])) ++pos_;
  }

  char peek() {
    if (pos_ >= text_.size()) fail("unexpected end of input");
    return text_[pos_];
  }

  SentimentTree parse_node() {
    if (peek() != '(') fail("expected '('");
    ++pos_;
    skip_space();
    if (peek() == ')') fail("empty node");

    SentimentTree node;
    node.label = parse_label();
    skip_space();

    if (peek() == '(') {
      while (peek() == '(') {
        node.children.push_back(parse_node());
        skip_space();
      }
      if (node.children.size() != 2) fail("internal node must have exactly 2 children");
    } else if (peek() == ')') {
      fail("node has a label but no content");
    } else {
      const std::size_t start = pos_;
      while (pos_ < text_.size() && !is_space(text_[pos_]) && text_[pos_] != '(' && text_[pos_] != ')') ++pos_;
      node.token = lowercase(text_.substr(start, pos_ - start));
      skip_space();
    }
    if (peek() != ')') fail("expected ')'");
    ++pos_;
    return node;
  }

  int parse_label() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() && !is_space(text_[pos_]) && text_[pos_] != '(' && text_[pos_] != ')') ++pos_;
    const std::string_view word = text_.substr(start, pos_ - start);
    if (word.size() != 1 || word[0] < '0' || word[0] > '4') {
      pos_ = start;
      fail("label must be an integer in 0..4, got '" + std::string(word) + "'");
    }
    return word[0] - '0';
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

void collect_phrases(const SentimentTree& tree, std::vector<LabeledPhrase>& out) {
  out.push_back({tree.leaves(), tree.label});
  for (const auto& c : tree.children) collect_phrases(c, out);
}

}  // namespace

SentimentTree parse_ptb_tree(std::string_view line) { return TreeParser(line).parse(); }

std::string serialize_tree(const SentimentTree& tree) {
  std::string out = "(" + std::to_string(tree.label) + " ";
  if (tree.is_leaf()) {
    out += tree.token;
  } else {
    out += serialize_tree(tree.children[0]);
    out += " ";
    out += serialize_tree(tree.children[1]);
  }
  out += ")";
  return out;
}

std::vector<LabeledPhrase> extract_phrases(const SentimentTree& tree) {
  std::vector<LabeledPhrase> out;
  out.reserve(tree.node_count());
  collect_phrases(tree, out);
  return out;
}

Vocab build_vocab(const std::vector<LabeledPhrase>& phrases, int min_count) {
  if (min_count < 1) throw ParameterError("build_vocab: min_count must be >= 1");
  if (phrases.empty()) throw DataError("build_vocab: empty corpus");
  std::map<std::string, std::size_t> counts;
  for (const auto& p : phrases)
    for (const auto& t : p.tokens) ++counts[t];

  std::vector<std::pair<std::string, std::size_t>> ranked;
  for (const auto& [token, count] : counts) {
    const bool reserved = std::find(kReserved.begin(), kReserved.end(), token) != kReserved.end();
    if (!reserved && count >= static_cast<std::size_t>(min_count)) ranked.emplace_back(token, count);
  }
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  std::vector<std::string> tokens;
  tokens.reserve(ranked.size());
  for (auto& [token, count] : ranked) tokens.push_back(token);
  return Vocab(tokens);
}

std::vector<PhraseExample> encode(const Vocab& vocab, const std::vector<LabeledPhrase>& phrases) {
  std::vector<PhraseExample> out;
  out.reserve(phrases.size());
  for (const auto& p : phrases) {
    if (p.tokens.empty()) throw DataError("phrase with no tokens");
    out.push_back({vocab.encode(p.tokens), p.fine_label, coarse_from_fine(p.fine_label)});
  }
  return out;
}

std::vector<std::vector<std::size_t>> make_batches(std::size_t example_count, std::size_t batch_size, Rng& rng) {
  if (batch_size < 1) throw ParameterError("make_batches: batch_size must be >= 1");
  std::vector<std::size_t> order(example_count);
  for (std::size_t i = 0; i < example_count; ++i) order[i] = i;
  // Fisher-Yates with the project generator; std::shuffle is implementation-defined.
  for (std::size_t i = example_count; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < example_count; start += batch_size) {
    const std::size_t end = std::min(example_count, start + batch_size);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    const std::size_t start = i;
    while (i < text.size() && !is_space(text[i])) ++i;
    if (i > start) out.push_back(lowercase(text.substr(start, i - start)));
  }
  return out;
}

std::vector<LabeledPhrase> parse_labeled_text(std::string_view text, bool all_phrases) {
  std::vector<LabeledPhrase> out;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

    std::size_t first = 0;
    while (first < line.size() && is_space(line[first])) ++first;
    if (first < line.size()) {
      if (line[first] == '(') {
        SentimentTree tree;
        try {
          tree = parse_ptb_tree(line);
        } catch (const ParseError& e) {
          throw ParseError(std::string("line starting at byte ") + std::to_string(start) + ": " + e.what(),
                           start + e.offset());
        }
        if (all_phrases) {
          auto phrases = extract_phrases(tree);
          out.insert(out.end(), phrases.begin(), phrases.end());
        } else {
          out.push_back({tree.leaves(), tree.label});
        }
      } else {
        const std::size_t tab = line.find('\t');
        if (tab == std::string_view::npos) throw ParseError("tsv: missing tab separator", start);
        const std::string_view label = line.substr(0, tab);
        if (label.size() != 1 || label[0] < '0' || label[0] > '4') {
          throw ParseError("tsv: label must be an integer in 0..4", start);
        }
        auto tokens = tokenize(line.substr(tab + 1));
        if (tokens.empty()) throw ParseError("tsv: no tokens", start + tab + 1);
        out.push_back({std::move(tokens), label[0] - '0'});
      }
    }
    start = end + 1;
  }
  return out;
}

std::vector<LabeledPhrase> load_labeled_file(const std::string& path, bool all_phrases) {
  return parse_labeled_text(read_file(path), all_phrases);
}

std::string to_tsv(const std::vector<LabeledPhrase>& phrases) {
  std::string out;
  for (const auto& p : phrases) {
    out += std::to_string(p.fine_label);
    out += '\t';
    for (std::size_t i = 0; i < p.tokens.size(); ++i) {
      if (i) out += ' ';
      out += p.tokens[i];
    }
    out += '\n';
  }
  return out;
}

std::vector<std::vector<std::string>> load_sentences(const std::string& path) {
  const std::string text = read_file(path);
  std::vector<std::vector<std::string>> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    auto tokens = tokenize(line);
    if (!tokens.empty()) out.push_back(std::move(tokens));
  }
  return out;
}

// ---- synthetic grammar --------------------------------------------------------

namespace {

struct Word {
  const char* text;
  int polarity;
};

constexpr std::array<Word, 4> kVerbs = {{{"like", 1}, {"love", 2}, {"dislike", -1}, {"hate", -2}}};
constexpr std::array<Word, 6> kAdjectives = {
    {{"good", 1}, {"great", 2}, {"bad", -1}, {"terrible", -2}, {"interesting", 1}, {"boring", -1}}};
constexpr std::array<const char*, 3> kIntensifiers = {"very", "incredibly", "so"};
constexpr std::array<const char*, 2> kSubjects = {"i", "we"};
constexpr std::array<const char*, 5> kNouns = {"movie", "plot", "film", "story", "acting"};
constexpr std::array<const char*, 2> kCopulas = {"is", "was"};
const std::array<std::vector<std::string>, 5> kTails = {{
    {"i", "saw", "last", "night"},
    {"that", "i", "saw"},
    {"at", "the", "cinema"},
    {"last", "week"},
    {"."},
}};

template <typename Array>
const auto& pick(const Array& items, Rng& rng) {
  return items[rng.below(items.size())];
}

void append(std::vector<std::string>& out, std::initializer_list<std::string> words) {
  out.insert(out.end(), words.begin(), words.end());
}

// Returns the clause value and appends its words.
int verb_clause(Rng& rng, std::vector<std::string>& out) {
  const Word& verb = pick(kVerbs, rng);
  const bool negated = rng.uniform() < 0.3;
  const bool intensified = !negated && rng.uniform() < 0.3;
  out.emplace_back(pick(kSubjects, rng));
  if (negated) {
    if (rng.uniform() < 0.5) {
      append(out, {"do", "not"});
    } else {
      append(out, {"did", "n't"});
    }
  }
  if (intensified) out.emplace_back("so");
  append(out, {verb.text, "the", pick(kNouns, rng)});
  return clause_value(verb.polarity, intensified, negated);
}

int adjective_clause(Rng& rng, std::vector<std::string>& out) {
  const Word& adj = pick(kAdjectives, rng);
  const bool negated = rng.uniform() < 0.3;
  const bool intensified = rng.uniform() < 0.3;
  append(out, {"the", pick(kNouns, rng), pick(kCopulas, rng)});
  if (negated) out.emplace_back(rng.uniform() < 0.5 ? "not" : "n't");
  if (intensified) out.emplace_back(pick(kIntensifiers, rng));
  out.emplace_back(adj.text);
  return clause_value(adj.polarity, intensified, negated);
}

int any_clause(Rng& rng, std::vector<std::string>& out) {
  return rng.uniform() < 0.5 ? verb_clause(rng, out) : adjective_clause(rng, out);
}

}  // namespace

int word_polarity(std::string_view word) {
  for (const auto& w : kVerbs)
    if (word == w.text) return w.polarity;
  for (const auto& w : kAdjectives)
    if (word == w.text) return w.polarity;
  return 0;
}

bool is_sentiment_word(std::string_view word) { return word_polarity(word) != 0; }

int clause_value(int base, bool intensified, bool negated) {
  int value = base;
  if (intensified) value = value > 0 ? 2 : -2;
  if (negated) value = value > 0 ? -1 : 1;
  return value;
}

int label_from_value(int value) {
  if (value < -2 || value > 2 || value == 0) throw ParameterError("clause value out of range");
  return value + 2;
}

std::vector<LabeledPhrase> generate_synthetic_grammar(Rng& rng, std::size_t n) {
  if (n < 1) throw ParameterError("generate_synthetic_grammar: n must be >= 1");
  std::vector<LabeledPhrase> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    LabeledPhrase phrase;
    const double form = rng.uniform();
    int value;
    if (form < 0.45) {
      value = verb_clause(rng, phrase.tokens);
    } else if (form < 0.85) {
      value = adjective_clause(rng, phrase.tokens);
    } else {
      any_clause(rng, phrase.tokens);
      phrase.tokens.emplace_back("though");
      value = any_clause(rng, phrase.tokens);
    }
    if (rng.uniform() < 0.3) {
      const auto& tail = pick(kTails, rng);
      phrase.tokens.insert(phrase.tokens.end(), tail.begin(), tail.end());
    }
    phrase.fine_label = label_from_value(value);
    out.push_back(std::move(phrase));
  }
  return out;
}

std::vector<LabeledPhrase> generate_hate_love_sentences(Rng& rng, std::size_t n) {
  std::vector<LabeledPhrase> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    LabeledPhrase phrase;
    const bool hate = rng.uniform() < 0.5;
    append(phrase.tokens, {pick(kSubjects, rng), hate ? "hate" : "love", "the", pick(kNouns, rng)});
    if (rng.uniform() < 0.5) {
      const auto& tail = pick(kTails, rng);
      phrase.tokens.insert(phrase.tokens.end(), tail.begin(), tail.end());
    }
    phrase.fine_label = hate ? 0 : 4;
    out.push_back(std::move(phrase));
  }
  return out;
}

}  // namespace nnviz::corpus
