#pragma once

#include <string>
#include <string_view>
#include <variant>

#include "nnviz/corpus.hpp"
#include "nnviz/models.hpp"
#include "nnviz/optim.hpp"
#include "nnviz/seq2seq.hpp"

namespace nnviz::cli {

inline constexpr std::string_view kCheckpointMagic = "NNVIZ1";
inline constexpr int kCheckpointVersion = 1;

// Layout: the magic line, then text metadata lines
//   format <version> / model <kind> / arch <key=value ...> / created <timestamp> /
//   vocab_hash <hex> / config <n> + n bytes / vocab <n> + n bytes / tensors <count>
// followed by one "tensor <name> <rows> <cols>" line and rows*cols little-endian
// binary64 values per tensor (embedding first, then the model's layout order),
// and a closing "end" line.
struct Checkpoint {
  std::variant<models::ModelParams, seq2seq::Seq2SeqParams> model;
  optim::TrainConfig config;
  corpus::Vocab vocab;
  std::string created;

  bool is_seq2seq() const noexcept { return model.index() == 1; }
  // Throw DataError naming the kind actually stored.
  const models::ModelParams& classifier() const;
  const seq2seq::Seq2SeqParams& seq2seq() const;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

std::string serialize_checkpoint(const Checkpoint& checkpoint);
// Magic and version are checked before anything else is read. Structural problems
// throw ParseError with the byte offset; an unknown version throws DataError.
Checkpoint parse_checkpoint(std::string_view bytes);

void save_checkpoint(const std::string& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::string& path);

// NNVIZ_TIMESTAMP when set (for reproducible artifacts), else the current UTC time.
std::string creation_timestamp();

}  // namespace nnviz::cli
