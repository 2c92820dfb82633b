#include "nnviz/io.hpp"

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "nnviz/errors.hpp"

namespace nnviz {

namespace fs = std::filesystem;

namespace {

std::string temp_name(const std::string& path) {
  static std::atomic<unsigned> counter{0};
  return path + ".tmp." + std::to_string(::getpid()) + "." + std::to_string(counter++);
}

void write_bytes(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out) {
    out.close();
    std::remove(path.c_str());
    throw DataError("short write to '" + path + "'");
  }
}

void rename_over(const std::string& from, const std::string& to) {
  std::error_code ec;
  fs::rename(from, to, ec);
  if (ec) {
    fs::remove(from, ec);
    throw DataError("cannot move output into place at '" + to + "'");
  }
}

}  // namespace

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::string& path, const std::string& bytes) {
  const std::string temp = temp_name(path);
  write_bytes(temp, bytes);
  rename_over(temp, path);
}

StagedOutputs::~StagedOutputs() {
  std::error_code ec;
  for (const Entry& e : staged_) fs::remove(e.temp, ec);
}

void StagedOutputs::add(const std::string& path, const std::string& bytes) {
  for (const Entry& e : staged_) {
    if (e.path == path) throw ParameterError("output '" + path + "' requested twice");
  }
  Entry e{temp_name(path), path};
  write_bytes(e.temp, bytes);
  staged_.push_back(std::move(e));
}

void StagedOutputs::commit() {
  for (const Entry& e : staged_) rename_over(e.temp, e.path);
  staged_.clear();
}

}  // namespace nnviz
