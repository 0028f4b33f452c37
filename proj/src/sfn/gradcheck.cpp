#include "sfn/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace sfn {

double GradCheckReport::max_rel_error() const {
  double worst = 0.0;
  for (const auto& e : entries) worst = std::max(worst, e.max_rel_error);
  return worst;
}

namespace {

constexpr double kRelativeFloor = 1e-5;

double evaluate(const LossClosure& loss, const ParamStore<double>& params) {
  Tape<double> tape;
  const Var root = loss(tape, params);
  return tape.value(root)(0, 0);
}

}  // namespace

GradCheckReport grad_check(const std::string& name, const LossClosure& loss,
                           ParamStore<double>& params, double tolerance, double epsilon) {
  GradCheckReport report;
  report.name = name;
  report.tolerance = tolerance;

  Tape<double> tape;
  const Var root = loss(tape, params);
  if (!std::isfinite(tape.value(root)(0, 0))) {
    report.failure = "non-finite";
    return report;
  }
  tape.backward(root);
  params.zero_grads();
  tape.accumulate_param_grads(params.grads());

  for (std::size_t i = 0; i < params.size(); ++i) {
    GradCheckEntry entry{params.spec(i).name};
    auto& value = params.value(i);
    const auto& analytic = params.grads()[i];
    for (Eigen::Index r = 0; r < value.rows(); ++r) {
      for (Eigen::Index c = 0; c < value.cols(); ++c) {
        const double saved = value(r, c);
        value(r, c) = saved + epsilon;
        const double up = evaluate(loss, params);
        value(r, c) = saved - epsilon;
        const double down = evaluate(loss, params);
        value(r, c) = saved;
        if (!std::isfinite(up) || !std::isfinite(down)) {
          report.failure = "non-finite";
          return report;
        }
        const double numeric = (up - down) / (2.0 * epsilon);
        const double a = analytic(r, c);
        const double abs_err = std::abs(a - numeric);
        const double denom = std::max({std::abs(a), std::abs(numeric), kRelativeFloor});
        entry.max_abs_error = std::max(entry.max_abs_error, abs_err);
        entry.max_rel_error = std::max(entry.max_rel_error, abs_err / denom);
      }
    }
    report.entries.push_back(std::move(entry));
  }
  report.passed = std::all_of(report.entries.begin(), report.entries.end(),
                              [tolerance](const GradCheckEntry& e) { return e.max_rel_error < tolerance; });
  return report;
}

}  // namespace sfn
