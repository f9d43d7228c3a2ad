#pragma once

#include <cmath>
#include <vector>

#include "ubiphysio/nn/core.hpp"

namespace ubiphysio::nn {

template <typename S>
struct LossGrad {
  double value = 0.0;
  Mat<S> grad;  // d value / d prediction
};

// Mean smooth-L1 (beta = 1) over the selected rows and the columns whose mask
// entry is nonzero. An empty mask selects every column.
template <typename S>
LossGrad<S> smooth_l1(const Mat<S>& pred, const Mat<S>& target, const std::vector<char>& mask = {},
                      int row_begin = 0, int row_count = -1) {
  check_shape(pred.rows() == target.rows() && pred.cols() == target.cols(), "smooth_l1: shape mismatch");
  if (row_count < 0) row_count = static_cast<int>(pred.rows()) - row_begin;
  LossGrad<S> out;
  out.grad = Mat<S>::Zero(pred.rows(), pred.cols());
  long count = 0;
  for (Eigen::Index j = 0; j < pred.cols(); ++j) {
    if (!mask.empty() && !mask[j]) continue;
    count += row_count;
  }
  if (count == 0) return out;
  double sum = 0.0;
  const double inv = 1.0 / static_cast<double>(count);
  for (Eigen::Index j = 0; j < pred.cols(); ++j) {
    if (!mask.empty() && !mask[j]) continue;
    for (int i = row_begin; i < row_begin + row_count; ++i) {
      double d = static_cast<double>(pred(i, j)) - static_cast<double>(target(i, j));
      double ad = std::abs(d);
      if (ad < 1.0) {
        sum += 0.5 * d * d;
        out.grad(i, j) = static_cast<S>(d * inv);
      } else {
        sum += ad - 0.5;
        out.grad(i, j) = static_cast<S>((d > 0 ? 1.0 : -1.0) * inv);
      }
    }
  }
  out.value = sum * inv;
  return out;
}

// Mean squared error over masked columns.
template <typename S>
LossGrad<S> mse(const Mat<S>& pred, const Mat<S>& target, const std::vector<char>& mask = {}) {
  check_shape(pred.rows() == target.rows() && pred.cols() == target.cols(), "mse: shape mismatch");
  LossGrad<S> out;
  out.grad = Mat<S>::Zero(pred.rows(), pred.cols());
  long cols = 0;
  for (Eigen::Index j = 0; j < pred.cols(); ++j) cols += mask.empty() || mask[j];
  if (cols == 0) return out;
  const double inv = 1.0 / (static_cast<double>(cols) * static_cast<double>(pred.rows()));
  double sum = 0.0;
  for (Eigen::Index j = 0; j < pred.cols(); ++j) {
    if (!mask.empty() && !mask[j]) continue;
    for (Eigen::Index i = 0; i < pred.rows(); ++i) {
      double d = static_cast<double>(pred(i, j)) - static_cast<double>(target(i, j));
      sum += d * d;
      out.grad(i, j) = static_cast<S>(2.0 * d * inv);
    }
  }
  out.value = sum * inv;
  return out;
}

// Mean softmax cross-entropy of logits (classes x batch) against 0-based labels.
template <typename S>
LossGrad<S> softmax_cross_entropy(const Mat<S>& logits, const std::vector<int>& labels) {
  check_shape(static_cast<std::size_t>(logits.cols()) == labels.size(), "cross entropy: label count mismatch");
  LossGrad<S> out;
  out.grad.resize(logits.rows(), logits.cols());
  double sum = 0.0;
  const double inv = 1.0 / static_cast<double>(labels.size());
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    Eigen::Matrix<double, Eigen::Dynamic, 1> z = logits.col(j).template cast<double>();
    double mx = z.maxCoeff();
    Eigen::Matrix<double, Eigen::Dynamic, 1> e = (z.array() - mx).exp();
    double denom = e.sum();
    sum += -(z(labels[j]) - mx - std::log(denom));
    Eigen::Matrix<double, Eigen::Dynamic, 1> p = e / denom;
    p(labels[j]) -= 1.0;
    out.grad.col(j) = (p * inv).template cast<S>();
  }
  out.value = sum * inv;
  return out;
}

}  // namespace ubiphysio::nn
