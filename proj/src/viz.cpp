#include "nnviz/viz.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "nnviz/errors.hpp"
#include "nnviz/parallel.hpp"
#include "nnviz/text.hpp"

namespace nnviz::viz {

std::string to_string(Palette palette) {
  return palette == Palette::diverging_blue_red ? "diverging_blue_red" : "sequential";
}

Palette parse_palette(const std::string& name) {
  if (name == "diverging_blue_red" || name == "diverging") return Palette::diverging_blue_red;
  if (name == "sequential") return Palette::sequential;
  throw ParameterError("unknown palette '" + name + "'");
}

namespace {

constexpr Rgb kWhite{255, 255, 255};
constexpr Rgb kBlue{33, 102, 172};
constexpr Rgb kRed{178, 24, 43};
constexpr Rgb kDeep{8, 48, 107};

Rgb mix(Rgb from, Rgb to, double t) {
  auto lerp = [t](std::uint8_t a, std::uint8_t b) {
    return static_cast<std::uint8_t>(std::lround(static_cast<double>(a) + (static_cast<double>(b) - a) * t));
  };
  return {lerp(from.r, to.r), lerp(from.g, to.g), lerp(from.b, to.b)};
}

std::string hex(Rgb c) {
  static const char* digits = "0123456789abcdef";
  std::string s = "#";
  for (std::uint8_t v : {c.r, c.g, c.b}) {
    s += digits[v >> 4];
    s += digits[v & 15];
  }
  return s;
}

std::string xml_escape(std::string_view text) {
  std::string out;
  for (char ch : text) {
    switch (ch) {
      case '&':
        out += "&amp;";
        break;
      case '<':
        out += "&lt;";
        break;
      case '>':
        out += "&gt;";
        break;
      case '"':
        out += "&quot;";
        break;
      case '\'':
        out += "&apos;";
        break;
      default:
        // Drop control characters that XML 1.0 forbids.
        if (static_cast<unsigned char>(ch) >= 0x20 || ch == '\t' || ch == '\n') out += ch;
    }
  }
  return out;
}

std::size_t label_width(const std::vector<std::string>& labels) {
  std::size_t widest = 0;
  for (const auto& l : labels) widest = std::max(widest, l.size());
  return labels.empty() ? 0 : widest * 7 + 8;
}

void check_spec(const HeatmapSpec& spec) {
  if (!spec.row_labels.empty() && spec.row_labels.size() != spec.matrix.rows()) {
    throw DimensionError("heatmap: " + std::to_string(spec.row_labels.size()) + " row labels for " +
                         std::to_string(spec.matrix.rows()) + " rows");
  }
  if (!spec.col_labels.empty() && spec.col_labels.size() != spec.matrix.cols()) {
    throw DimensionError("heatmap: " + std::to_string(spec.col_labels.size()) + " column labels for " +
                         std::to_string(spec.matrix.cols()) + " columns");
  }
  if (spec.cell_px < 1) throw ParameterError("heatmap: cell size must be >= 1");
}

}  // namespace

Rgb cell_color(Palette palette, double value, double lo, double hi) {
  if (palette == Palette::diverging_blue_red) {
    const double m = std::max(std::abs(lo), std::abs(hi));
    if (m == 0.0 || value == 0.0) return kWhite;
    const double t = std::min(1.0, std::abs(value) / m);
    return mix(kWhite, value < 0.0 ? kBlue : kRed, t);
  }
  if (hi <= lo) return kWhite;
  return mix(kWhite, kDeep, std::clamp((value - lo) / (hi - lo), 0.0, 1.0));
}

std::pair<double, double> value_range(const HeatmapSpec& spec) {
  const Matrix& m = spec.matrix;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) {
      const double v = m(r, c);
      if (!std::isfinite(v)) {
        throw NumericError("heatmap: non-finite value at (" + std::to_string(r) + ", " + std::to_string(c) + ")");
      }
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  if (spec.fixed_range) return *spec.fixed_range;
  if (m.empty()) return {0.0, 0.0};
  if (spec.palette == Palette::diverging_blue_red) {
    const double a = std::max(std::abs(lo), std::abs(hi));
    return {-a, a};
  }
  return {std::min(0.0, lo), hi};
}

std::string render_svg(const HeatmapSpec& spec) {
  check_spec(spec);
  const auto [lo, hi] = value_range(spec);
  const Matrix& m = spec.matrix;
  const std::size_t cell = spec.cell_px;
  const std::size_t left = label_width(spec.row_labels);
  const std::size_t title_h = spec.title.empty() ? 0 : 20;
  const std::size_t header_h = spec.col_labels.empty() ? 0 : 16;
  const std::size_t top = title_h + header_h;
  const std::size_t width = left + m.cols() * cell;
  const std::size_t height = top + m.rows() * cell;
  const auto n = [](std::size_t v) { return std::to_string(v); };

  std::string svg;
  svg += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" + n(width) + "\" height=\"" +
         n(height) + "\" viewBox=\"0 0 " + n(width) + " " + n(height) + "\">\n";
  if (!spec.title.empty()) {
    svg += "<text x=\"2\" y=\"14\" font-family=\"monospace\" font-size=\"12\">" + xml_escape(spec.title) +
           "</text>\n";
  }
  for (std::size_t c = 0; c < spec.col_labels.size(); ++c) {
    svg += "<text x=\"" + n(left + c * cell + cell / 2) + "\" y=\"" + n(title_h + 12) +
           "\" font-family=\"monospace\" font-size=\"10\" text-anchor=\"middle\">" + xml_escape(spec.col_labels[c]) +
           "</text>\n";
  }
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const std::size_t y = top + r * cell;
    if (!spec.row_labels.empty()) {
      svg += "<text x=\"" + n(left - 4) + "\" y=\"" + n(y + cell / 2 + 4) +
             "\" font-family=\"monospace\" font-size=\"11\" text-anchor=\"end\">" + xml_escape(spec.row_labels[r]) +
             "</text>\n";
    }
    for (std::size_t c = 0; c < m.cols(); ++c) {
      svg += "<rect x=\"" + n(left + c * cell) + "\" y=\"" + n(y) + "\" width=\"" + n(cell) + "\" height=\"" +
             n(cell) + "\" fill=\"" + hex(cell_color(spec.palette, m(r, c), lo, hi)) + "\"/>\n";
    }
  }
  svg += "</svg>\n";
  return svg;
}

std::string render_scatter_svg(const ScatterSpec& spec) {
  const Matrix& pts = spec.points;
  if (pts.cols() != 2) throw DimensionError("scatter: points must be N x 2, got " + pts.shape_string());
  if (!spec.labels.empty() && spec.labels.size() != pts.rows()) {
    throw DimensionError("scatter: " + std::to_string(spec.labels.size()) + " labels for " +
                         std::to_string(pts.rows()) + " points");
  }
  if (!spec.groups.empty() && spec.groups.size() != pts.rows()) {
    throw DimensionError("scatter: " + std::to_string(spec.groups.size()) + " groups for " +
                         std::to_string(pts.rows()) + " points");
  }
  if (spec.size_px < 64) throw ParameterError("scatter: size must be at least 64 px");
  double lo[2] = {0.0, 0.0}, hi[2] = {0.0, 0.0};
  for (std::size_t i = 0; i < pts.rows(); ++i) {
    for (std::size_t k = 0; k < 2; ++k) {
      const double v = pts(i, k);
      if (!std::isfinite(v)) {
        throw NumericError("non-finite value at (" + std::to_string(i) + ", " + std::to_string(k) + ")");
      }
      lo[k] = i == 0 ? v : std::min(lo[k], v);
      hi[k] = i == 0 ? v : std::max(hi[k], v);
    }
  }
  // Fixed palette, cycled by group id.
  static const Rgb kGroupColors[] = {{0x21, 0x66, 0xac}, {0xb2, 0x18, 0x2b}, {0x1b, 0x78, 0x37},
                                     {0x76, 0x2a, 0x83}, {0xe0, 0x82, 0x14}, {0x4d, 0x4d, 0x4d}};
  const std::size_t size = spec.size_px;
  const std::size_t title_h = spec.title.empty() ? 0 : 20;
  const double margin = 24.0;
  const double span = static_cast<double>(size) - 2.0 * margin;
  const double extent = std::max({hi[0] - lo[0], hi[1] - lo[1], 1e-12});
  const auto n = [](std::size_t v) { return std::to_string(v); };
  const auto px = [](double v) { return format_double(std::round(v * 10.0) / 10.0); };

  std::string svg;
  svg += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" + n(size) + "\" height=\"" +
         n(size + title_h) + "\" viewBox=\"0 0 " + n(size) + " " + n(size + title_h) + "\">\n";
  svg += "<rect x=\"0\" y=\"0\" width=\"" + n(size) + "\" height=\"" + n(size + title_h) + "\" fill=\"#ffffff\"/>\n";
  if (!spec.title.empty()) {
    svg += "<text x=\"2\" y=\"14\" font-family=\"monospace\" font-size=\"12\">" + xml_escape(spec.title) +
           "</text>\n";
  }
  for (std::size_t i = 0; i < pts.rows(); ++i) {
    const double x = margin + (pts(i, 0) - lo[0]) / extent * span;
    const double y = static_cast<double>(title_h) + margin + (hi[1] - pts(i, 1)) / extent * span;
    const int g = spec.groups.empty() ? 0 : spec.groups[i];
    const std::size_t idx = static_cast<std::size_t>(g < 0 ? -g : g) % std::size(kGroupColors);
    svg += "<rect x=\"" + px(x - 3.0) + "\" y=\"" + px(y - 3.0) + "\" width=\"6\" height=\"6\" fill=\"" +
           hex(kGroupColors[idx]) + "\"/>\n";
    if (!spec.labels.empty()) {
      svg += "<text x=\"" + px(x + 5.0) + "\" y=\"" + px(y + 3.0) +
             "\" font-family=\"monospace\" font-size=\"9\">" + xml_escape(spec.labels[i]) + "</text>\n";
    }
  }
  svg += "</svg>\n";
  return svg;
}

std::string render_ppm(const HeatmapSpec& spec) {
  check_spec(spec);
  const auto [lo, hi] = value_range(spec);
  const Matrix& m = spec.matrix;
  const std::size_t cell = spec.cell_px;
  const std::size_t width = m.cols() * cell;
  const std::size_t height = m.rows() * cell;
  std::string out = "P6\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
  out.reserve(out.size() + width * height * 3);
  for (std::size_t py = 0; py < height; ++py) {
    for (std::size_t px = 0; px < width; ++px) {
      const Rgb c = cell_color(spec.palette, m(py / cell, px / cell), lo, hi);
      out += static_cast<char>(c.r);
      out += static_cast<char>(c.g);
      out += static_cast<char>(c.b);
    }
  }
  return out;
}

std::string csv_escape(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char ch : field) {
    if (ch == '"') out += '"';
    out += ch;
  }
  out += '"';
  return out;
}

std::string export_matrix_csv(const Matrix& matrix, const std::vector<std::string>& labels,
                              std::string_view label_header) {
  if (!labels.empty() && labels.size() != matrix.rows()) {
    throw DimensionError("csv: " + std::to_string(labels.size()) + " labels for " + std::to_string(matrix.rows()) +
                         " rows");
  }
  const bool with_labels = !labels.empty();
  std::string out;
  if (with_labels) out += csv_escape(label_header);
  for (std::size_t c = 0; c < matrix.cols(); ++c) {
    if (c > 0 || with_labels) out += ',';
    out += "dim_" + std::to_string(c);
  }
  out += '\n';
  for (std::size_t r = 0; r < matrix.rows(); ++r) {
    if (with_labels) out += csv_escape(labels[r]);
    for (std::size_t c = 0; c < matrix.cols(); ++c) {
      if (c > 0 || with_labels) out += ',';
      out += format_double(matrix(r, c));
    }
    out += '\n';
  }
  return out;
}

std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool field_started = false;
  std::size_t i = 0;
  auto end_field = [&] {
    row.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_row = [&] {
    end_field();
    rows.push_back(std::move(row));
    row.clear();
  };
  while (i < text.size()) {
    const char ch = text[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          i += 2;
          continue;
        }
        quoted = false;
      } else {
        field += ch;
      }
      ++i;
      continue;
    }
    if (ch == '"') {
      if (field_started) throw ParseError("csv: stray quote", i);
      quoted = true;
      field_started = true;
    } else if (ch == ',') {
      end_field();
    } else if (ch == '\n' || ch == '\r') {
      end_row();
      if (ch == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
    } else {
      field += ch;
      field_started = true;
    }
    ++i;
  }
  if (quoted) throw ParseError("csv: unterminated quoted field", text.size());
  if (field_started || !row.empty()) end_row();
  return rows;
}

CsvMatrix parse_matrix_csv(std::string_view text) {
  const auto rows = parse_csv(text);
  if (rows.empty()) throw DataError("csv: missing header");
  const auto& header = rows[0];
  const bool with_labels = !header.empty() && header[0] != "dim_0";
  const std::size_t offset = with_labels ? 1 : 0;
  const std::size_t cols = header.size() - offset;
  for (std::size_t c = 0; c < cols; ++c) {
    if (header[c + offset] != "dim_" + std::to_string(c)) throw DataError("csv: unexpected header '" + header[c + offset] + "'");
  }
  CsvMatrix out;
  out.matrix = Matrix(rows.size() - 1, cols);
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() != header.size()) {
      throw DataError("csv: row " + std::to_string(r) + " has " + std::to_string(rows[r].size()) + " fields, expected " +
                      std::to_string(header.size()));
    }
    if (with_labels) out.labels.push_back(rows[r][0]);
    for (std::size_t c = 0; c < cols; ++c) {
      try {
        out.matrix(r - 1, c) = parse_double(rows[r][c + offset], "csv value");
      } catch (const ParameterError& e) {
        throw DataError(std::string(e.what()) + " in row " + std::to_string(r));
      }
    }
  }
  return out;
}

// ---- t-SNE ------------------------------------------------------------------------

namespace {

Matrix squared_distances(const Matrix& x) {
  const std::size_t n = x.rows();
  Matrix d(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < x.cols(); ++k) {
        const double diff = x(i, k) - x(j, k);
        s += diff * diff;
      }
      d(i, j) = s;
      d(j, i) = s;
    }
  }
  return d;
}

// Conditional row P(j | i) for precision beta; returns the entropy in nats.
double conditional_row(const Matrix& d, std::size_t i, double beta, std::span<double> row) {
  const std::size_t n = d.rows();
  double min_d = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < n; ++j) {
    if (j != i) min_d = std::min(min_d, d(i, j));
  }
  double sum = 0.0;
  double weighted = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    if (j == i) {
      row[j] = 0.0;
      continue;
    }
    const double shifted = d(i, j) - min_d;
    row[j] = std::exp(-beta * shifted);
    sum += row[j];
    weighted += shifted * row[j];
  }
  for (std::size_t j = 0; j < n; ++j) row[j] /= sum;
  return std::log(sum) + beta * weighted / sum;
}

void check_tsne_input(const Matrix& points, double perplexity) {
  if (!(perplexity >= 2.0)) throw ParameterError("t-SNE perplexity must be >= 2");
  if (!(static_cast<double>(points.rows()) > 3.0 * perplexity)) {
    throw ParameterError("t-SNE needs more than 3 * perplexity points (have " + std::to_string(points.rows()) + ")");
  }
  if (!all_finite(points.span())) throw ParameterError("t-SNE input contains non-finite values");
}

}  // namespace

Affinities joint_affinities(const Matrix& points, double perplexity) {
  check_tsne_input(points, perplexity);
  const std::size_t n = points.rows();
  const Matrix d = squared_distances(points);
  const double target = std::log(perplexity);
  Matrix cond(n, n);
  Affinities out;
  out.perplexities.resize(n);

  parallel_for(n, [&](std::size_t i) {
    double mean_d = 0.0;
    for (std::size_t j = 0; j < n; ++j) mean_d += d(i, j);
    mean_d /= static_cast<double>(n - 1);
    double beta = mean_d > 0.0 ? 1.0 / mean_d : 1.0;
    double lo = 0.0;
    double hi = std::numeric_limits<double>::infinity();
    double entropy = conditional_row(d, i, beta, cond.row(i));
    for (int step = 0; step < 50 && std::abs(entropy - target) > 1e-5; ++step) {
      if (entropy > target) {
        lo = beta;
        beta = std::isinf(hi) ? beta * 2.0 : (beta + hi) / 2.0;
      } else {
        hi = beta;
        beta = (beta + lo) / 2.0;
      }
      entropy = conditional_row(d, i, beta, cond.row(i));
    }
    out.perplexities[i] = std::exp2(entropy / std::log(2.0));
  });

  out.joint = Matrix(n, n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      out.joint(i, j) = (cond(i, j) + cond(j, i)) / (2.0 * static_cast<double>(n));
      total += out.joint(i, j);
    }
  }
  for (double& v : out.joint.span()) v /= total;
  return out;
}

namespace {

// Student-t numerators 1 / (1 + |y_i - y_j|^2); returns their sum over i != j.
double student_kernel(const Matrix& y, Matrix& num) {
  const std::size_t n = y.rows();
  parallel_for(n, [&](std::size_t i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) {
        num(i, j) = 0.0;
        continue;
      }
      const double dx = y(i, 0) - y(j, 0);
      const double dy = y(i, 1) - y(j, 1);
      num(i, j) = 1.0 / (1.0 + dx * dx + dy * dy);
    }
  });
  double sum = 0.0;
  for (double v : num.span()) sum += v;
  return sum;
}

void center(Matrix& y) {
  for (std::size_t c = 0; c < y.cols(); ++c) {
    double mean = 0.0;
    for (std::size_t r = 0; r < y.rows(); ++r) mean += y(r, c);
    mean /= static_cast<double>(y.rows());
    for (std::size_t r = 0; r < y.rows(); ++r) y(r, c) -= mean;
  }
}

}  // namespace

double kl_divergence(const Matrix& joint, const Matrix& embedding) {
  if (joint.rows() != embedding.rows() || joint.cols() != joint.rows() || embedding.cols() != 2) {
    throw DimensionError("kl_divergence: P is " + joint.shape_string() + ", Y is " + embedding.shape_string());
  }
  Matrix num(joint.rows(), joint.rows());
  const double z = student_kernel(embedding, num);
  double kl = 0.0;
  for (std::size_t i = 0; i < joint.size(); ++i) {
    const double p = joint.data()[i];
    if (p > 0.0) kl += p * std::log(p / std::max(num.data()[i] / z, 1e-300));
  }
  return kl;
}

TsneResult tsne(const Matrix& points, const TsneConfig& cfg) {
  check_tsne_input(points, cfg.perplexity);
  if (!(cfg.learning_rate > 0.0)) throw ParameterError("t-SNE learning rate must be > 0");
  const std::size_t n = points.rows();
  TsneResult result;
  result.affinities = joint_affinities(points, cfg.perplexity);
  const Matrix& p = result.affinities.joint;

  Rng rng(cfg.seed);
  Matrix y(n, 2);
  for (double& v : y.span()) v = 1e-4 * rng.normal();
  result.initial_kl = kl_divergence(p, y);

  Matrix velocity(n, 2);
  Matrix gains(n, 2, 1.0);
  Matrix grad(n, 2);
  Matrix num(n, n);
  for (std::size_t iter = 0; iter < cfg.iters; ++iter) {
    const double exaggeration = iter < cfg.exaggeration_iters ? cfg.exaggeration : 1.0;
    const double momentum = iter < cfg.momentum_switch ? cfg.initial_momentum : cfg.final_momentum;
    const double z = student_kernel(y, num);
    parallel_for(n, [&](std::size_t i) {
      double gx = 0.0, gy = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (i == j) continue;
        const double w = (exaggeration * p(i, j) - num(i, j) / z) * num(i, j);
        gx += w * (y(i, 0) - y(j, 0));
        gy += w * (y(i, 1) - y(j, 1));
      }
      grad(i, 0) = 4.0 * gx;
      grad(i, 1) = 4.0 * gy;
    });
    for (std::size_t k = 0; k < y.size(); ++k) {
      double& g = gains.data()[k];
      const double dk = grad.data()[k];
      double& v = velocity.data()[k];
      g = (dk > 0.0) != (v > 0.0) ? g + 0.2 : g * 0.8;
      g = std::max(g, 0.01);
      v = momentum * v - cfg.learning_rate * g * dk;
      y.data()[k] += v;
    }
    center(y);
    if (!all_finite(y.span())) throw NumericError("t-SNE diverged at iteration " + std::to_string(iter));
  }
  result.final_kl = kl_divergence(p, y);
  result.embedding = std::move(y);
  return result;
}

}  // namespace nnviz::viz
