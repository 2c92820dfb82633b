#include "nnviz/checkpoint.hpp"

#include <bit>
#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <ctime>
#include <limits>
#include <sstream>

#include "nnviz/errors.hpp"
#include "nnviz/io.hpp"
#include "nnviz/text.hpp"

namespace nnviz::cli {

namespace {

std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) out[i] = digits[v & 0xf];
  return out;
}

std::string arch_line(const models::ArchSpec& s) {
  std::string out = "kind=" + models::to_string(s.kind);
  out += " layers=" + std::to_string(s.layers);
  out += " embed_dim=" + std::to_string(s.embed_dim);
  out += " hidden_dim=" + std::to_string(s.hidden_dim);
  out += " num_classes=" + std::to_string(s.num_classes);
  out += " activation=" + to_string(s.activation);
  out += std::string(" bias=") + (s.use_bias ? "1" : "0");
  out += " lstm_output=" + models::to_string(s.lstm_output);
  return out;
}

std::string arch_line(const seq2seq::Seq2SeqSpec& s) {
  return "vocab_size=" + std::to_string(s.vocab_size) + " embed_dim=" + std::to_string(s.embed_dim) +
         " hidden_dim=" + std::to_string(s.hidden_dim) + " lstm_output=" + models::to_string(s.lstm_output);
}

void put_tensor(std::string& out, const std::string& name, const Matrix& m) {
  out += "tensor " + name + " " + std::to_string(m.rows()) + " " + std::to_string(m.cols()) + "\n";
  const std::size_t start = out.size();
  out.resize(start + 8 * m.size());
  char* p = out.data() + start;
  for (double v : std::span<const double>(m.data(), m.size())) {
    std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
    for (int b = 0; b < 8; ++b, bits >>= 8) *p++ = static_cast<char>(bits & 0xff);
  }
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  std::size_t offset() const noexcept { return pos_; }
  bool at_end() const noexcept { return pos_ == bytes_.size(); }

  std::string_view line() {
    const std::size_t eol = bytes_.find('\n', pos_);
    if (eol == std::string_view::npos) throw ParseError("checkpoint truncated: unterminated line", pos_);
    std::string_view out = bytes_.substr(pos_, eol - pos_);
    pos_ = eol + 1;
    return out;
  }

  // "<keyword> <rest>"; returns rest.
  std::string_view field(std::string_view keyword) {
    const std::size_t at = pos_;
    std::string_view l = line();
    if (l.substr(0, keyword.size()) != keyword || l.size() <= keyword.size() || l[keyword.size()] != ' ') {
      throw ParseError("checkpoint: expected '" + std::string(keyword) + "' line", at);
    }
    return l.substr(keyword.size() + 1);
  }

  std::size_t count(std::string_view keyword) {
    const std::size_t at = pos_;
    return to_size(field(keyword), keyword, at);
  }

  std::string_view take(std::size_t n, std::string_view what) {
    if (bytes_.size() - pos_ < n) {
      throw ParseError("checkpoint truncated: " + std::string(what) + " needs " + std::to_string(n) + " bytes, " +
                           std::to_string(bytes_.size() - pos_) + " left",
                       pos_);
    }
    std::string_view out = bytes_.substr(pos_, n);
    pos_ += n;
    return out;
  }

  static std::size_t to_size(std::string_view text, std::string_view what, std::size_t at) {
    try {
      const long long v = parse_integer(text, what);
      if (v < 0) throw ParameterError("negative");
      return static_cast<std::size_t>(v);
    } catch (const ParameterError&) {
      throw ParseError("checkpoint: bad " + std::string(what) + " '" + std::string(text) + "'", at);
    }
  }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

std::vector<std::pair<std::string, std::string>> key_values(std::string_view text, std::size_t at) {
  std::vector<std::pair<std::string, std::string>> out;
  std::istringstream ss{std::string(text)};
  std::string item;
  while (ss >> item) {
    const std::size_t eq = item.find('=');
    if (eq == std::string::npos || eq == 0) throw ParseError("checkpoint: malformed arch entry '" + item + "'", at);
    out.emplace_back(item.substr(0, eq), item.substr(eq + 1));
  }
  return out;
}

models::ArchSpec parse_arch_line(std::string_view text, std::size_t at) {
  models::ArchSpec s;
  try {
    for (const auto& [k, v] : key_values(text, at)) {
      if (k == "kind") s.kind = models::parse_arch(v);
      else if (k == "layers") s.layers = Reader::to_size(v, k, at);
      else if (k == "embed_dim") s.embed_dim = Reader::to_size(v, k, at);
      else if (k == "hidden_dim") s.hidden_dim = Reader::to_size(v, k, at);
      else if (k == "num_classes") s.num_classes = Reader::to_size(v, k, at);
      else if (k == "activation") s.activation = parse_activation(v);
      else if (k == "bias") s.use_bias = Reader::to_size(v, k, at) != 0;
      else if (k == "lstm_output") s.lstm_output = models::parse_lstm_output(v);
      else throw ParseError("checkpoint: unknown arch key '" + k + "'", at);
    }
    s.validate();
  } catch (const ParameterError& e) {
    throw ParseError(std::string("checkpoint: ") + e.what(), at);
  }
  return s;
}

seq2seq::Seq2SeqSpec parse_s2s_line(std::string_view text, std::size_t at) {
  seq2seq::Seq2SeqSpec s;
  try {
    for (const auto& [k, v] : key_values(text, at)) {
      if (k == "vocab_size") s.vocab_size = Reader::to_size(v, k, at);
      else if (k == "embed_dim") s.embed_dim = Reader::to_size(v, k, at);
      else if (k == "hidden_dim") s.hidden_dim = Reader::to_size(v, k, at);
      else if (k == "lstm_output") s.lstm_output = models::parse_lstm_output(v);
      else throw ParseError("checkpoint: unknown arch key '" + k + "'", at);
    }
    s.validate();
  } catch (const ParameterError& e) {
    throw ParseError(std::string("checkpoint: ") + e.what(), at);
  }
  return s;
}

Matrix read_tensor(Reader& r, const std::string& name, std::size_t rows, std::size_t cols) {
  const std::size_t at = r.offset();
  std::istringstream ss{std::string(r.field("tensor"))};
  std::string got_name, extra;
  std::size_t got_rows = 0, got_cols = 0;
  if (!(ss >> got_name >> got_rows >> got_cols) || (ss >> extra)) {
    throw ParseError("checkpoint: malformed tensor header", at);
  }
  if (got_name != name) throw ParseError("checkpoint: expected tensor '" + name + "', found '" + got_name + "'", at);
  if (got_rows != rows || got_cols != cols) {
    throw ParseError("checkpoint: tensor '" + name + "' has shape " + std::to_string(got_rows) + "x" +
                         std::to_string(got_cols) + ", expected " + std::to_string(rows) + "x" + std::to_string(cols),
                     at);
  }
  Matrix m(rows, cols);
  const std::string_view payload = r.take(8 * m.size(), "tensor '" + name + "'");
  const auto* p = reinterpret_cast<const unsigned char*>(payload.data());
  for (std::size_t i = 0; i < m.size(); ++i) {
    std::uint64_t bits = 0;
    for (int b = 7; b >= 0; --b) bits = (bits << 8) | p[8 * i + b];
    m.data()[i] = std::bit_cast<double>(bits);
  }
  return m;
}

}  // namespace

const models::ModelParams& Checkpoint::classifier() const {
  if (is_seq2seq()) throw DataError("checkpoint holds a seq2seq model, not a classifier");
  return std::get<0>(model);
}

const seq2seq::Seq2SeqParams& Checkpoint::seq2seq() const {
  if (!is_seq2seq()) throw DataError("checkpoint holds a classifier, not a seq2seq model");
  return std::get<1>(model);
}

std::string serialize_checkpoint(const Checkpoint& c) {
  if (c.created.find('\n') != std::string::npos) throw ParameterError("checkpoint timestamp must be one line");
  std::string out(kCheckpointMagic);
  out += "\nformat " + std::to_string(kCheckpointVersion) + "\n";
  const Matrix* embedding;
  std::vector<models::TensorShape> layout;
  const std::vector<Matrix>* weights;
  if (c.is_seq2seq()) {
    const auto& p = std::get<1>(c.model);
    p.validate();
    out += "model seq2seq\narch " + arch_line(p.spec) + "\n";
    embedding = &p.embedding;
    layout = seq2seq::seq2seq_layout(p.spec);
    weights = &p.weights;
  } else {
    const auto& p = std::get<0>(c.model);
    p.validate();
    out += "model classifier\narch " + arch_line(p.spec) + "\n";
    embedding = &p.embedding;
    layout = models::weight_layout(p.spec);
    weights = &p.weights;
  }
  if (embedding->rows() != c.vocab.size()) {
    throw DimensionError("checkpoint vocab has " + std::to_string(c.vocab.size()) + " entries, embedding has " +
                         std::to_string(embedding->rows()) + " rows");
  }
  out += "created " + c.created + "\n";
  out += "vocab_hash " + hex64(c.vocab.hash()) + "\n";
  const std::string config = optim::serialize_config(c.config);
  out += "config " + std::to_string(config.size()) + "\n" + config;
  const std::string vocab = c.vocab.serialize();
  out += "vocab " + std::to_string(vocab.size()) + "\n" + vocab;
  out += "tensors " + std::to_string(layout.size() + 1) + "\n";
  put_tensor(out, "embedding", *embedding);
  for (std::size_t i = 0; i < layout.size(); ++i) put_tensor(out, layout[i].name, (*weights)[i]);
  out += "end\n";
  return out;
}

Checkpoint parse_checkpoint(std::string_view bytes) {
  if (bytes.substr(0, kCheckpointMagic.size() + 1) != std::string(kCheckpointMagic) + "\n") {
    throw ParseError("not a checkpoint: bad magic", 0);
  }
  Reader r(bytes);
  r.line();
  {
    const std::size_t at = r.offset();
    const std::size_t version = r.count("format");
    if (version != static_cast<std::size_t>(kCheckpointVersion)) {
      throw DataError("checkpoint format version " + std::to_string(version) + " is not supported (expected " +
                      std::to_string(kCheckpointVersion) + ", header at byte " + std::to_string(at) + ")");
    }
  }
  Checkpoint c;
  const std::size_t kind_at = r.offset();
  const std::string kind(r.field("model"));
  if (kind != "classifier" && kind != "seq2seq") throw ParseError("checkpoint: unknown model kind '" + kind + "'", kind_at);
  const std::size_t arch_at = r.offset();
  const std::string_view arch = r.field("arch");
  const bool s2s = kind == "seq2seq";
  models::ArchSpec spec;
  seq2seq::Seq2SeqSpec s2s_spec;
  if (s2s) s2s_spec = parse_s2s_line(arch, arch_at);
  else spec = parse_arch_line(arch, arch_at);

  c.created = std::string(r.field("created"));
  const std::size_t hash_at = r.offset();
  const std::string hash(r.field("vocab_hash"));

  const std::size_t config_len = r.count("config");
  const std::size_t config_at = r.offset();
  const std::string_view config = r.take(config_len, "config block");
  try {
    c.config = optim::parse_config(config);
  } catch (const ParseError& e) {
    throw ParseError(std::string("checkpoint config: ") + e.what(), config_at + e.offset());
  } catch (const ParameterError& e) {
    throw ParseError(std::string("checkpoint config: ") + e.what(), config_at);
  }
  const std::size_t vocab_len = r.count("vocab");
  const std::size_t vocab_at = r.offset();
  const std::string_view vocab = r.take(vocab_len, "vocab block");
  try {
    c.vocab = corpus::Vocab::deserialize(vocab);
  } catch (const ParseError& e) {
    throw ParseError(std::string("checkpoint vocab: ") + e.what(), vocab_at + e.offset());
  }
  if (hex64(c.vocab.hash()) != hash) throw ParseError("checkpoint: vocab hash mismatch", hash_at);

  const std::size_t count_at = r.offset();
  const std::size_t count = r.count("tensors");
  const std::size_t v = c.vocab.size();
  if (s2s) {
    if (s2s_spec.vocab_size != v) throw ParseError("checkpoint: arch vocab_size disagrees with vocab", arch_at);
    const auto layout = seq2seq::seq2seq_layout(s2s_spec);
    if (count != layout.size() + 1) throw ParseError("checkpoint: wrong tensor count", count_at);
    seq2seq::Seq2SeqParams p;
    p.spec = s2s_spec;
    p.embedding = read_tensor(r, "embedding", v, s2s_spec.embed_dim);
    for (const auto& t : layout) p.weights.push_back(read_tensor(r, t.name, t.rows, t.cols));
    c.model = std::move(p);
  } else {
    const auto layout = models::weight_layout(spec);
    if (count != layout.size() + 1) throw ParseError("checkpoint: wrong tensor count", count_at);
    models::ModelParams p;
    p.spec = spec;
    p.embedding = read_tensor(r, "embedding", v, spec.embed_dim);
    for (const auto& t : layout) p.weights.push_back(read_tensor(r, t.name, t.rows, t.cols));
    c.model = std::move(p);
  }
  const std::size_t end_at = r.offset();
  if (r.line() != "end") throw ParseError("checkpoint: expected 'end'", end_at);
  if (!r.at_end()) throw ParseError("checkpoint: trailing bytes", r.offset());
  return c;
}

void save_checkpoint(const std::string& path, const Checkpoint& checkpoint) {
  write_file_atomic(path, serialize_checkpoint(checkpoint));
}

Checkpoint load_checkpoint(const std::string& path) { return parse_checkpoint(read_file(path)); }

std::string creation_timestamp() {
  if (const char* env = std::getenv("NNVIZ_TIMESTAMP"); env && *env) {
    std::string ts(env);
    for (char& ch : ts)
      if (ch == '\n' || ch == '\r') ch = ' ';
    return ts;
  }
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm utc{};
  gmtime_r(&now, &utc);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &utc);
  return buf;
}

}  // namespace nnviz::cli
