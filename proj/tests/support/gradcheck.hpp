#pragma once

// Central finite-difference oracle for the reverse-mode gradients. Test-only:
// independent of every backward rule it checks.

#include <functional>
#include <random>

#include "defsurf/ad/ops.hpp"

namespace defsurf::test {

struct GradCheckReport {
  double max_rel_error = 0;
  long checked = 0;
};

// `builder` rebuilds the scalar loss from the CURRENT parameter values.
// For `samples` random entries per parameter, compares the accumulated
// analytic gradient against a central difference with step `h`.
inline GradCheckReport check_gradients(
    const std::function<ad::Tensor()>& builder, std::vector<ad::Tensor> params,
    int samples_per_param, double h, std::mt19937_64& rng,
    double denom_floor = 1e-6) {
  GradCheckReport report;

  ad::Tensor root = builder();
  ad::backward(root);
  std::vector<Mat> analytic;
  analytic.reserve(params.size());
  for (auto& p : params)
    analytic.push_back(p.has_grad()
                           ? p.grad()
                           : Mat::Zero(p.rows(), p.cols()));

  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    ad::Tensor& param = params[pi];
    const Index total = param.value().size();
    for (int s = 0; s < samples_per_param; ++s) {
      const Index flat = static_cast<Index>(rng() % static_cast<std::uint64_t>(total));
      const Index r = flat % param.rows();
      const Index c = flat / param.rows();

      const Real saved = param.raw_value()(r, c);
      param.raw_value()(r, c) = saved + static_cast<Real>(h);
      const double f_plus = static_cast<double>(builder().value()(0, 0));
      param.raw_value()(r, c) = saved - static_cast<Real>(h);
      const double f_minus = static_cast<double>(builder().value()(0, 0));
      param.raw_value()(r, c) = saved;

      const double fd = (f_plus - f_minus) / (2.0 * h);
      const double an = static_cast<double>(analytic[pi](r, c));
      const double denom =
          std::max({std::abs(fd), std::abs(an), denom_floor});
      report.max_rel_error =
          std::max(report.max_rel_error, std::abs(an - fd) / denom);
      ++report.checked;
    }
  }
  for (auto& p : params) p.zero_grad();
  return report;
}

}  // namespace defsurf::test
