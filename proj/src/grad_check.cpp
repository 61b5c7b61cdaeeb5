#include "sten/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace sten {

GradCheckReport grad_check(const std::function<double(bool with_grads)>& loss_fn,
                           ParameterStore& params, double step, double tol, std::size_t stride) {
  if (stride == 0) stride = 1;
  GradCheckReport report;
  params.zero_gradients();
  (void)loss_fn(true);

  std::vector<std::vector<double>> analytic(params.size());
  for (std::size_t p = 0; p < params.size(); ++p) analytic[p] = params[p].gradient.v;

  for (std::size_t p = 0; p < params.size(); ++p) {
    Parameter& par = params[p];
    for (std::size_t j = 0; j < par.value.size(); j += stride) {
      double saved = par.value.v[j];
      par.value.v[j] = saved + step;
      double up = loss_fn(false);
      par.value.v[j] = saved - step;
      double down = loss_fn(false);
      par.value.v[j] = saved;

      double numeric = (up - down) / (2.0 * step);
      double a = analytic[p][j];
      double rel;
      if (!std::isfinite(numeric) || !std::isfinite(a)) {
        rel = std::numeric_limits<double>::infinity();
      } else {
        rel = std::abs(a - numeric) / std::max(1.0, std::abs(a));
      }
      ++report.checked;
      if (rel > report.max_rel_err || report.checked == 1) {
        report.max_rel_err = rel;
        report.worst_param = par.name;
        report.worst_index = j;
        report.worst_analytic = a;
        report.worst_numeric = numeric;
      }
      if (!(rel <= tol)) {
        report.passed = false;
        if (report.failures.size() < 32) {
          report.failures.push_back({par.name, j, a, numeric, rel});
        }
      }
    }
  }
  return report;
}

}  // namespace sten
