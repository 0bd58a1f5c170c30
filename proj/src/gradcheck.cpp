#include "samctr/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "samctr/errors.hpp"

namespace samctr {

GradCheckResult finite_diff_check(const std::function<double(ParameterStore&)>& loss,
                                  ParameterStore& store, double eps) {
  if (!(eps > 0.0)) throw DomainError("finite_diff_check: eps must be positive");
  GradCheckResult result;
  for (auto& slot : store) {
    if (!slot.trainable) continue;
    for (std::size_t k = 0; k < slot.value.size(); ++k) {
      const double saved = slot.value[k];
      slot.value[k] = saved + eps;
      const double up = loss(store);
      slot.value[k] = saved - eps;
      const double down = loss(store);
      slot.value[k] = saved;
      if (!std::isfinite(up) || !std::isfinite(down)) {
        throw NumericError("finite_diff_check: non-finite loss probing '" + slot.name + "'[" +
                           std::to_string(k) + "]");
      }
      const double numeric = (up - down) / (2.0 * eps);
      const double analytic = slot.grad[k];
      const double err = std::abs(analytic - numeric) / std::max(1.0, std::abs(numeric));
      ++result.checked;
      if (err > result.max_relative_error || result.checked == 1) {
        result.max_relative_error = std::max(err, result.max_relative_error);
        if (err >= result.max_relative_error) {
          result.worst_slot = slot.name;
          result.worst_index = k;
          result.worst_analytic = analytic;
          result.worst_numeric = numeric;
        }
      }
    }
  }
  return result;
}

}  // namespace samctr
