#pragma once

#include <cmath>
#include <vector>

#include "ubiphysio/nn/core.hpp"

namespace ubiphysio::nn {

struct AdamConfig {
  double lr = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;  // decoupled, only on params flagged for decay
};

template <typename S>
class Adam {
 public:
  Adam(std::vector<Param<S>*> params, const AdamConfig& cfg) : params_(std::move(params)), cfg_(cfg) {
    for (auto* p : params_) {
      m_.push_back(Mat<S>::Zero(p->value.rows(), p->value.cols()));
      v_.push_back(Mat<S>::Zero(p->value.rows(), p->value.cols()));
    }
  }

  void set_lr(double lr) { cfg_.lr = lr; }
  double lr() const { return cfg_.lr; }
  long steps() const { return t_; }

  void step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    const S b1 = static_cast<S>(cfg_.beta1), b2 = static_cast<S>(cfg_.beta2);
    const S step = static_cast<S>(cfg_.lr / bc1);
    const S root_bc2 = static_cast<S>(std::sqrt(bc2));
    const S eps = static_cast<S>(cfg_.eps);
    for (std::size_t i = 0; i < params_.size(); ++i) {
      auto* p = params_[i];
      if (p->decay && cfg_.weight_decay > 0.0) p->value *= static_cast<S>(1.0 - cfg_.lr * cfg_.weight_decay);
      m_[i] = b1 * m_[i] + (S(1) - b1) * p->grad;
      v_[i] = b2 * v_[i] + (S(1) - b2) * p->grad.cwiseProduct(p->grad);
      p->value.array() -= step * m_[i].array() / (v_[i].array().sqrt() / root_bc2 + eps);
    }
  }

  const std::vector<Mat<S>>& first_moments() const { return m_; }
  const std::vector<Mat<S>>& second_moments() const { return v_; }

 private:
  std::vector<Param<S>*> params_;
  AdamConfig cfg_;
  std::vector<Mat<S>> m_, v_;
  long t_ = 0;
};

}  // namespace ubiphysio::nn
