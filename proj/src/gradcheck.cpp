#include "tgnseal/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace tgnseal {

double GradCheckReport::worst() const {
  double w = 0.0;
  for (const auto& e : params) w = std::max(w, e.max_rel_error);
  return w;
}

GradCheckReport finite_diff_check(const std::function<Tensor()>& f, std::vector<Tensor> params,
                                  std::vector<std::string> names, double h, double tol,
                                  double floor) {
  for (Tensor& p : params) p.zero_grad();
  backward(f());

  GradCheckReport report;
  report.tolerance = tol;
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = params[i];
    const std::vector<double> analytic =
        p.has_grad() ? std::vector<double>(p.grad().begin(), p.grad().end())
                     : std::vector<double>(p.numel(), 0.0);
    GradCheckEntry entry;
    entry.name = i < names.size() ? names[i] : "param" + std::to_string(i);
    auto w = p.mutable_data();
    for (std::size_t j = 0; j < w.size(); ++j) {
      const double orig = w[j];
      double plus = 0.0, minus = 0.0;
      {
        NoGradGuard no_grad;
        w[j] = orig + h;
        plus = f().item();
        w[j] = orig - h;
        minus = f().item();
      }
      w[j] = orig;
      const double numeric = (plus - minus) / (2.0 * h);
      const double abs_err = std::abs(analytic[j] - numeric);
      const double denom = std::max({std::abs(analytic[j]), std::abs(numeric), floor});
      entry.max_abs_error = std::max(entry.max_abs_error, abs_err);
      entry.max_rel_error = std::max(entry.max_rel_error, abs_err / denom);
    }
    if (entry.max_rel_error >= tol) report.passed = false;
    report.params.push_back(std::move(entry));
  }
  for (Tensor& p : params) p.zero_grad();
  return report;
}

}  // namespace tgnseal
