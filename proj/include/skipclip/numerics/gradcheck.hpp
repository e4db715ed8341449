#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "skipclip/numerics/param_set.hpp"

namespace skipclip::numerics {

/// |a - b| / max(|a|, |b|, 1e-8).
double relative_error(double analytic, double numeric);

struct ParamCheck {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  bool flagged = false;
};

struct GradCheckReport {
  std::vector<ParamCheck> params;
  double max_rel_error = 0.0;
  std::size_t flagged = 0;
  bool passed() const { return flagged == 0; }
};

/// Evaluates the loss at `params`; when `grads` is non-null it also receives
/// the analytic gradient (same names and shapes as params).
using CheckedObjective = std::function<double(const ParamSet<double>& params, ParamSet<double>* grads)>;

/// Central differences over every coordinate of every parameter tensor.
GradCheckReport finite_diff_check(const CheckedObjective& loss, const ParamSet<double>& params,
                                  double step, double tol);

}  // namespace skipclip::numerics
