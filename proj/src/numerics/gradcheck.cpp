#include "skipclip/numerics/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace skipclip::numerics {

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

GradCheckReport finite_diff_check(const CheckedObjective& loss, const ParamSet<double>& params,
                                  double step, double tol) {
  ParamSet<double> analytic = params.zeros_like();
  loss(params, &analytic);

  GradCheckReport report;
  ParamSet<double> probe = params;
  for (std::size_t p = 0; p < probe.size(); ++p) {
    auto& entry = probe.entries()[p];
    const auto& grad = analytic.entries()[p].tensor;
    ParamCheck check{entry.name};
    for (std::size_t i = 0; i < entry.tensor.size(); ++i) {
      const double saved = entry.tensor[i];
      entry.tensor[i] = saved + step;
      const double up = loss(probe, nullptr);
      entry.tensor[i] = saved - step;
      const double down = loss(probe, nullptr);
      entry.tensor[i] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double err = relative_error(grad[i], numeric);
      if (i == 0 || err > check.max_rel_error) {
        check.max_rel_error = err;
        check.worst_index = i;
        check.analytic = grad[i];
        check.numeric = numeric;
      }
    }
    check.flagged = check.max_rel_error > tol;
    report.max_rel_error = std::max(report.max_rel_error, check.max_rel_error);
    report.flagged += check.flagged ? 1 : 0;
    report.params.push_back(std::move(check));
  }
  return report;
}

}  // namespace skipclip::numerics
