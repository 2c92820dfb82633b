#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include "nnviz/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  try {
    return nnviz::cli::run(args, std::cout, std::cerr);
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return nnviz::cli::kData;
  }
}
