#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "nnviz/linalg.hpp"

namespace nnviz::viz {

enum class Palette { diverging_blue_red, sequential };

std::string to_string(Palette palette);
Palette parse_palette(const std::string& name);

struct Rgb {
  std::uint8_t r, g, b;
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

struct HeatmapSpec {
  Matrix matrix;
  std::vector<std::string> row_labels;  // empty, or one per row
  std::vector<std::string> col_labels;  // empty, or one per column
  Palette palette = Palette::diverging_blue_red;
  std::size_t cell_px = 16;
  // Unset: symmetric about 0 for the diverging palette, [min(0, lo), max] for sequential.
  std::optional<std::pair<double, double>> fixed_range;
  std::string title;
};

// Diverging: 0 is white, -m and +m saturate to blue and red where m = max(|lo|, |hi|).
// Sequential: lo is white, hi saturates.
Rgb cell_color(Palette palette, double value, double lo, double hi);

// Resolved (lo, hi) for the spec. Throws NumericError naming the first non-finite cell.
std::pair<double, double> value_range(const HeatmapSpec& spec);

// SVG made of rect and text elements only. Deterministic bytes for a fixed spec.
std::string render_svg(const HeatmapSpec& spec);
// Binary PPM (P6) of the cells alone.
std::string render_ppm(const HeatmapSpec& spec);

// 2-D point plot for t-SNE output, again only rect and text elements: one square
// marker per point, coloured by `groups` (empty: all one colour) and captioned by
// `labels` (empty: no captions). Points are scaled to fit `size_px`.
struct ScatterSpec {
  Matrix points;  // N x 2
  std::vector<std::string> labels;
  std::vector<int> groups;
  std::size_t size_px = 480;
  std::string title;
};

std::string render_scatter_svg(const ScatterSpec& spec);

// Header "dim_0,...,dim_{D-1}", prefixed by `label_header` when labels are given,
// then one line per row in shortest round-trip form. RFC 4180 quoting, LF line ends.
std::string export_matrix_csv(const Matrix& matrix, const std::vector<std::string>& labels = {},
                              std::string_view label_header = "label");

struct CsvMatrix {
  Matrix matrix;
  std::vector<std::string> labels;  // empty when the file has no label column
};

// Inverse of export_matrix_csv. A leading column not named dim_0 is read as labels.
CsvMatrix parse_matrix_csv(std::string_view text);

std::string csv_escape(std::string_view field);
std::vector<std::vector<std::string>> parse_csv(std::string_view text);

struct TsneConfig {
  double perplexity = 30.0;
  std::size_t iters = 1000;
  double learning_rate = 100.0;
  double initial_momentum = 0.5;
  double final_momentum = 0.8;
  std::size_t momentum_switch = 250;
  double exaggeration = 4.0;
  std::size_t exaggeration_iters = 100;
  std::uint64_t seed = 1;
};

struct Affinities {
  Matrix joint;                        // symmetric, sums to 1
  std::vector<double> perplexities;   // achieved 2^H per point
};

// Per-point Gaussian bandwidths by binary search on the entropy (tolerance 1e-5,
// at most 50 steps), symmetrized (P + P^T) / 2N.
Affinities joint_affinities(const Matrix& points, double perplexity);

// KL(P || Q) for the Student-t kernel over `embedding` rows.
double kl_divergence(const Matrix& joint, const Matrix& embedding);

struct TsneResult {
  Matrix embedding;  // N x 2, centered
  Affinities affinities;
  double initial_kl = 0.0;
  double final_kl = 0.0;
};

// Exact O(N^2) t-SNE. Throws ParameterError unless perplexity >= 2, N > 3 perplexity
// and every point is finite.
TsneResult tsne(const Matrix& points, const TsneConfig& cfg);

}  // namespace nnviz::viz
