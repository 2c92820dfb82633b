#pragma once

#include <string>
#include <vector>

namespace nnviz {

// Whole file as bytes; DataError when it cannot be opened.
std::string read_file(const std::string& path);

// Writes to a sibling temp file and renames it over `path`.
void write_file_atomic(const std::string& path, const std::string& bytes);

// Output files of one command. Each add() writes a temp file next to its
// destination; commit() renames them all. Anything not committed is removed on
// destruction, so a failed command leaves no partial outputs behind.
class StagedOutputs {
 public:
  StagedOutputs() = default;
  StagedOutputs(const StagedOutputs&) = delete;
  StagedOutputs& operator=(const StagedOutputs&) = delete;
  ~StagedOutputs();

  void add(const std::string& path, const std::string& bytes);
  void commit();
  std::size_t size() const noexcept { return staged_.size(); }

 private:
  struct Entry {
    std::string temp;
    std::string path;
  };
  std::vector<Entry> staged_;
};

}  // namespace nnviz
