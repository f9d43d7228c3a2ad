#include "ubiphysio/plot.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <fmt/format.h>

#include "ubiphysio/errors.hpp"

namespace ubiphysio {

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

double parse_number(const std::string& s, const std::string& where) {
  try {
    std::size_t used = 0;
    double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ParseError("not a number in " + where + ": '" + s + "'");
  }
}

}  // namespace

int CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return static_cast<int>(i);
  }
  throw NotFoundError("CSV has no column '" + name + "'");
}

std::vector<double> CsvTable::numeric(int col) const {
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(parse_number(r.at(col), "column " + header.at(col)));
  return out;
}

CsvTable parse_csv(const std::string& text) {
  CsvTable t;
  std::istringstream in(text);
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split(line);
    if (t.header.empty()) {
      t.header = std::move(cells);
      continue;
    }
    if (cells.size() != t.header.size()) {
      throw ParseError(fmt::format("CSV line {} has {} cells, header has {}", lineno, cells.size(), t.header.size()));
    }
    t.rows.push_back(std::move(cells));
  }
  if (t.header.empty()) throw ParseError("CSV is empty");
  return t;
}

std::string write_csv(const CsvTable& t) {
  auto join = [](const std::vector<std::string>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + v[i];
    return s + "\n";
  };
  std::string out = join(t.header);
  for (const auto& r : t.rows) out += join(r);
  return out;
}

std::string confusion_to_csv(const Eigen::MatrixXi& m, const std::vector<std::string>& labels) {
  if (m.rows() != m.cols() || static_cast<std::size_t>(m.rows()) != labels.size()) {
    throw ValidationError("confusion matrix must be square with one label per class");
  }
  CsvTable t;
  t.header.push_back("true\\pred");
  t.header.insert(t.header.end(), labels.begin(), labels.end());
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    std::vector<std::string> row{labels[i]};
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(std::to_string(m(i, j)));
    t.rows.push_back(std::move(row));
  }
  return write_csv(t);
}

Eigen::MatrixXi confusion_from_csv(const std::string& text, std::vector<std::string>* labels) {
  auto t = parse_csv(text);
  const auto n = static_cast<Eigen::Index>(t.header.size()) - 1;
  if (n < 1 || static_cast<Eigen::Index>(t.rows.size()) != n) {
    throw ParseError("confusion CSV must have one row per class");
  }
  Eigen::MatrixXi m(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      double v = parse_number(t.rows[i][j + 1], "confusion CSV");
      if (v < 0 || v != std::floor(v)) throw ParseError("confusion counts must be non-negative integers");
      m(i, j) = static_cast<int>(v);
    }
  }
  if (labels) labels->assign(t.header.begin() + 1, t.header.end());
  return m;
}

std::string confusion_svg(const Eigen::MatrixXi& m, const std::vector<std::string>& labels, const std::string& title) {
  if (m.rows() != m.cols() || static_cast<std::size_t>(m.rows()) != labels.size() || m.rows() == 0) {
    throw ValidationError("confusion matrix must be square, non-empty, with one label per class");
  }
  const int n = static_cast<int>(m.rows());
  const int cell = 22, left = 70, top = 50;
  const int size = left + n * cell + 20;
  const double peak = std::max(1, m.maxCoeff());
  std::string out = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\" "
      "data-rows=\"{2}\" data-cols=\"{2}\">\n",
      size, size + 30, n);
  out += fmt::format("<text x=\"{}\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\">{}</text>\n", left,
                     escape(title));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const int v = m(i, j);
      const int shade = static_cast<int>(std::lround(255.0 * (1.0 - v / peak)));
      out += fmt::format(
          "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"rgb({},{},255)\" stroke=\"#ccc\" "
          "data-row=\"{}\" data-col=\"{}\" data-value=\"{}\"/>\n",
          left + j * cell, top + i * cell, cell, cell, shade, shade, i, j, v);
      if (v > 0) {
        out += fmt::format(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"9\" text-anchor=\"middle\" "
            "fill=\"{}\">{}</text>\n",
            left + j * cell + cell / 2, top + i * cell + cell / 2 + 3, shade < 128 ? "white" : "black", v);
      }
    }
    out += fmt::format(
        "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"9\" text-anchor=\"end\">{}</text>\n",
        left - 4, top + i * cell + cell / 2 + 3, escape(labels[i]));
    out += fmt::format(
        "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"9\" text-anchor=\"middle\">{}</text>\n",
        left + i * cell + cell / 2, top - 4, escape(labels[i]));
  }
  out += fmt::format(
      "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">predicted</text>\n",
      left + n * cell / 2, top + n * cell + 18);
  out += "</svg>\n";
  return out;
}

std::string curve_svg(const std::vector<CurveSeries>& series, const std::string& x_label, const std::string& title) {
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin, ymin = xmin, ymax = -xmin;
  std::size_t points = 0;
  for (const auto& s : series) {
    if (s.x.size() != s.y.size()) throw ValidationError("curve '" + s.name + "' has mismatched x and y");
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, s.y[i]);
      ymax = std::max(ymax, s.y[i]);
      ++points;
    }
  }
  if (points == 0) throw ValidationError("training curve has no data points");
  if (xmax == xmin) xmax = xmin + 1.0;
  if (ymax == ymin) ymax = ymin + 1.0;

  const double w = 640, h = 360, left = 60, top = 40, pw = w - left - 160, ph = h - top - 50;
  auto px = [&](double x) { return left + (x - xmin) / (xmax - xmin) * pw; };
  auto py = [&](double y) { return top + (1.0 - (y - ymin) / (ymax - ymin)) * ph; };
  static constexpr const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

  std::string out = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\">\n", w, h);
  out += fmt::format("<text x=\"{}\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\">{}</text>\n", left,
                     escape(title));
  out += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#888\"/>\n", left, top,
                     pw, ph);
  out += fmt::format(
      "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"10\">{:.4g}</text>\n"
      "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"10\">{:.4g}</text>\n",
      4, top + 10, ymax, 4, top + ph, ymin);
  out += fmt::format(
      "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"10\">{:.6g}</text>\n"
      "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"end\">{:.6g}</text>\n"
      "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">{}</text>\n",
      left, top + ph + 14, xmin, left + pw, top + ph + 14, xmax, left + pw / 2, top + ph + 32, escape(x_label));

  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* color = kColors[k % std::size(kColors)];
    std::string path;
    std::string dots;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      path += fmt::format("{}{:.2f},{:.2f}", path.empty() ? "M" : " L", px(s.x[i]), py(s.y[i]));
      dots += fmt::format(
          "<circle cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"1.5\" fill=\"{}\" data-series=\"{}\" data-x=\"{}\" "
          "data-y=\"{}\"/>\n",
          px(s.x[i]), py(s.y[i]), color, escape(s.name), s.x[i], s.y[i]);
    }
    out += fmt::format("<path d=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\"/>\n", path, color);
    out += dots;
    out += fmt::format(
        "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" fill=\"{}\">{}</text>\n", left + pw + 10,
        top + 14 + 16 * static_cast<double>(k), color, escape(s.name));
  }
  out += "</svg>\n";
  return out;
}

std::vector<CurveSeries> curves_from_csv(const CsvTable& t, const std::string& x_col,
                                         const std::vector<std::string>& y_cols) {
  if (t.rows.empty()) throw ValidationError("training log is empty");
  auto x = t.numeric(t.column(x_col));
  std::vector<CurveSeries> out;
  for (const auto& name : y_cols) out.push_back({name, x, t.numeric(t.column(name))});
  return out;
}

}  // namespace ubiphysio
