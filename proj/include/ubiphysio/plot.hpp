#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace ubiphysio {

// Plain comma-separated table with a header row; no quoting.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const;  // throws NotFoundError
  std::vector<double> numeric(int col) const;
};

CsvTable parse_csv(const std::string& text);
std::string write_csv(const CsvTable& t);

// Header "true\pred,<labels...>", one row per true class.
std::string confusion_to_csv(const Eigen::MatrixXi& m, const std::vector<std::string>& labels);
Eigen::MatrixXi confusion_from_csv(const std::string& text, std::vector<std::string>* labels = nullptr);

// Heatmap with one <rect> per cell carrying data-row, data-col and
// data-value attributes so the rendering can be checked against the CSV.
std::string confusion_svg(const Eigen::MatrixXi& m, const std::vector<std::string>& labels,
                          const std::string& title = "Confusion matrix");

struct CurveSeries {
  std::string name;
  std::vector<double> x, y;
};

// Line chart; each point is a <circle> with data-series, data-x and data-y.
std::string curve_svg(const std::vector<CurveSeries>& series, const std::string& x_label,
                      const std::string& title = "Training curve");

// Series for the named y columns against the x column of a training log.
std::vector<CurveSeries> curves_from_csv(const CsvTable& t, const std::string& x_col,
                                         const std::vector<std::string>& y_cols);

}  // namespace ubiphysio
