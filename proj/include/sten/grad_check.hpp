#pragma once

#include <functional>
#include <string>
#include <vector>

#include "sten/params.hpp"

namespace sten {

struct GradCheckFailure {
  std::string param;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_err = 0.0;
};

struct GradCheckReport {
  bool passed = true;
  double max_rel_err = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t checked = 0;
  std::vector<GradCheckFailure> failures;
};

/// Compares analytic gradients against central finite differences.
///
/// `loss_fn(true)` must rebuild the computation, run backward, and leave
/// gradients accumulated in `params` (the checker zeroes them first);
/// `loss_fn(false)` must evaluate the same loss without touching gradients.
/// Every `stride`-th element of each parameter is perturbed by +-step.
/// Relative error is |analytic - numeric| / max(1, |analytic|); errors above
/// `tol`, and any non-finite value, are recorded as failures.
GradCheckReport grad_check(const std::function<double(bool with_grads)>& loss_fn,
                           ParameterStore& params, double step = 1e-5, double tol = 1e-4,
                           std::size_t stride = 1);

}  // namespace sten
