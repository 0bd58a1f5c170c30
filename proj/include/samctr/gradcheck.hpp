#pragma once

#include <cstddef>
#include <functional>
#include <string>

#include "samctr/parameter_store.hpp"

namespace samctr {

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst_slot;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t checked = 0;
};

/// Compares the gradient buffers already present in `store` against central
/// differences of `loss`, entry by entry over trainable slots:
///   |analytic - numeric| / max(1, |numeric|).
/// `loss` must be deterministic and must not touch the gradient buffers.
/// Parameter values are restored exactly after each probe.
GradCheckResult finite_diff_check(const std::function<double(ParameterStore&)>& loss,
                                  ParameterStore& store, double eps = 1e-5);

}  // namespace samctr
