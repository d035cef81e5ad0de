#include "topoconv/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "topoconv/errors.hpp"

namespace topoconv {

namespace {

double evaluate(const LossBuilder& loss) {
  Tape tape;
  return loss(tape).value()[0];
}

}  // namespace

GradCheckReport grad_check(const LossBuilder& loss, const std::vector<NamedParameter>& params, double step,
                           double tolerance) {
  if (!(step >= 1e-7 && step <= 1e-3)) throw ValidationError("grad_check: step must lie in [1e-7, 1e-3]");

  for (const auto& np : params) np.param->zero_grad();
  {
    Tape tape;
    tape.backward(loss(tape));
  }
  std::vector<Tensor> analytic;
  analytic.reserve(params.size());
  for (const auto& np : params) analytic.push_back(np.param->grad);

  GradCheckReport report;
  report.tolerance = tolerance;
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& value = params[k].param->value;
    GradCheckEntry entry{params[k].name};
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double orig = value[i];
      value[i] = orig + step;
      const double up = evaluate(loss);
      value[i] = orig - step;
      const double down = evaluate(loss);
      value[i] = orig;
      const double numeric = (up - down) / (2.0 * step);
      const double a = analytic[k][i];
      entry.max_abs_error = std::max(entry.max_abs_error, std::abs(a - numeric));
      entry.scale = std::max(entry.scale, std::abs(a) + std::abs(numeric));
    }
    report.entries.push_back(std::move(entry));
  }
  double global = 0.0;
  for (const auto& e : report.entries) global = std::max(global, e.scale);
  const double floor = std::max(1e-8, 1e-3 * global);
  for (auto& e : report.entries) {
    e.rel_error = e.max_abs_error / std::max(floor, e.scale);
    report.max_rel_error = std::max(report.max_rel_error, e.rel_error);
  }
  for (const auto& np : params) np.param->zero_grad();
  report.passed = report.max_rel_error < tolerance;
  return report;
}

}  // namespace topoconv
