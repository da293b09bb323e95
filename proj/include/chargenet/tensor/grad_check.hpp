#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "chargenet/tensor/tape.hpp"

namespace chargenet {

struct GradCheckEntry {
  std::string name;
  double max_relative_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  bool passed = true;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double tolerance = 0.0;

  bool passed() const {
    return std::all_of(entries.begin(), entries.end(), [](const auto& e) { return e.passed; });
  }
  double max_relative_error() const {
    double m = 0.0;
    for (const auto& e : entries) m = std::max(m, e.max_relative_error);
    return m;
  }
};

/// Scalar-valued function of the parameters, recorded on the given tape.
using LossFn = std::function<Var(Tape&)>;

/// |a - n| / max(|a|, |n|, floor). The floor keeps gradients that are zero
/// up to finite-difference noise from reading as large relative errors.
inline double relative_error(double analytic, double numeric, double floor = 1e-3) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

/// Compares reverse-mode gradients with central differences, entry by entry.
inline GradCheckReport grad_check(const LossFn& loss_fn, const std::vector<Parameter*>& params,
                                  double tolerance = 1e-4, double step = 1e-5) {
  for (Parameter* p : params) p->clear_grad();
  {
    Tape tape;
    Var loss = loss_fn(tape);
    tape.backward(loss);
  }
  auto evaluate = [&] {
    Tape tape;
    return tape.value(loss_fn(tape)).item();
  };

  GradCheckReport report;
  report.tolerance = tolerance;
  for (Parameter* p : params) {
    GradCheckEntry entry;
    entry.name = p->name;
    const Tensor analytic = p->grad ? *p->grad : Tensor(p->value.shape());
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double saved = p->value[i];
      p->value[i] = saved + step;
      const double up = evaluate();
      p->value[i] = saved - step;
      const double down = evaluate();
      p->value[i] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double err = relative_error(analytic[i], numeric);
      if (err > entry.max_relative_error || i == 0) {
        entry.max_relative_error = std::max(entry.max_relative_error, err);
        entry.worst_index = i;
        entry.analytic = analytic[i];
        entry.numeric = numeric;
      }
    }
    entry.passed = entry.max_relative_error < tolerance;
    report.entries.push_back(entry);
  }
  for (Parameter* p : params) p->clear_grad();
  return report;
}

}  // namespace chargenet
