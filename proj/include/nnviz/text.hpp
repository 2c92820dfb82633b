#pragma once

#include <string>
#include <string_view>

namespace nnviz {

// Shortest decimal that parses back to the same double.
std::string format_double(double value);
// Whole-string parse; throws ParameterError naming `what` on failure.
double parse_double(std::string_view text, std::string_view what);
long long parse_integer(std::string_view text, std::string_view what);

std::string_view trim(std::string_view text);

}  // namespace nnviz
