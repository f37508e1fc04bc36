#pragma once

#include <functional>
#include <string>
#include <vector>

#include "tgnseal/tensor.hpp"

namespace tgnseal {

struct GradCheckEntry {
  std::string name;
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> params;
  double tolerance = 0.0;
  bool passed = true;
  double worst() const;
};

/// Compares analytic grads of scalar `f` against central differences.
///
/// Relative error per element is |a - n| / max(|a|, |n|, floor), where the
/// floor keeps entries whose true gradient is ~0 from being judged on
/// round-off alone. `f` must be deterministic and rebuild its graph on each
/// call. Parameter grads are zeroed before and after.
GradCheckReport finite_diff_check(const std::function<Tensor()>& f, std::vector<Tensor> params,
                                  std::vector<std::string> names, double h = 1e-5,
                                  double tol = 1e-4, double floor = 1e-3);

}  // namespace tgnseal
