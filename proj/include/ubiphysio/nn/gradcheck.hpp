#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "ubiphysio/nn/core.hpp"

namespace ubiphysio::nn {

struct GradCheckResult {
  std::string name;
  double rel_error = 0.0;  // |analytic - numeric| / max(|analytic| + |numeric|, floor), tensor norms
  double max_abs_diff = 0.0;
};

// Compares the gradients currently stored in each param against central
// differences of `loss`. `loss` must be a pure function of the parameter
// values. At most `max_entries` entries per tensor are probed, spread evenly.
inline std::vector<GradCheckResult> gradient_check(const std::vector<Param<double>*>& params,
                                                   const std::function<double()>& loss, double h = 1e-6,
                                                   int max_entries = 64) {
  std::vector<GradCheckResult> out;
  for (auto* p : params) {
    const Eigen::Index n = p->value.size();
    const Eigen::Index stride = std::max<Eigen::Index>(1, n / max_entries);
    double diff2 = 0.0, an2 = 0.0, nu2 = 0.0, max_abs = 0.0;
    for (Eigen::Index k = 0; k < n; k += stride) {
      double& w = p->value.data()[k];
      const double orig = w;
      w = orig + h;
      const double up = loss();
      w = orig - h;
      const double down = loss();
      w = orig;
      const double numeric = (up - down) / (2.0 * h);
      const double analytic = p->grad.data()[k];
      diff2 += (analytic - numeric) * (analytic - numeric);
      an2 += analytic * analytic;
      nu2 += numeric * numeric;
      max_abs = std::max(max_abs, std::abs(analytic - numeric));
    }
    GradCheckResult r;
    r.name = p->name;
    r.rel_error = std::sqrt(diff2) / std::max(std::sqrt(an2) + std::sqrt(nu2), 1e-12);
    r.max_abs_diff = max_abs;
    out.push_back(r);
  }
  return out;
}

}  // namespace ubiphysio::nn
