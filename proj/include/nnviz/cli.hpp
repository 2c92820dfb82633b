#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "nnviz/gradcheck.hpp"

namespace nnviz::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

// Runs one command line (argv[0] is the program name). Results go to `out`,
// the human-readable summary and diagnostics to `err`.
int run(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err);

struct GradcheckCase {
  std::string description;
  GradCheckReport report;
};

// Random small instances (T <= 6, D, H <= 8) of one architecture, or "seq2seq",
// each checked by central differences. Instance i is drawn from Rng(seed).split(i).
std::vector<GradcheckCase> gradcheck_suite(const std::string& arch, std::uint64_t seed, std::size_t count,
                                           double epsilon, double tolerance);

}  // namespace nnviz::cli
