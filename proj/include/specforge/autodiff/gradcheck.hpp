#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "specforge/autodiff/tensor.hpp"

namespace specforge::ad {

struct GradCheckReport {
  double max_rel_err = 0.0;
  double tol = 0.0;
  std::size_t checked = 0;
  std::string worst;  // "param[i]"
  bool pass() const { return max_rel_err < tol; }
};

// Compares tape gradients of a scalar-valued function against central finite
// differences. `f` rebuilds the graph from the current contents of `inputs`
// on a fresh tape and returns the scalar root.
template <class Real>
GradCheckReport grad_check(
    const std::function<Var<Real>(Tape<Real>&, std::vector<Param<Real>*>&)>& f,
    std::vector<Param<Real>*> inputs, double h = 1e-5, double tol = 1e-4) {
  GradCheckReport report;
  report.tol = tol;

  for (auto* p : inputs) p->zero_grad();
  {
    Tape<Real> tape;
    Var<Real> root = f(tape, inputs);
    tape.backward(root);
    tape.collect_param_grads();
  }

  auto eval = [&]() -> double {
    Tape<Real> tape;
    return static_cast<double>(f(tape, inputs).scalar());
  };

  for (auto* p : inputs) {
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const Real saved = p->value[i];
      p->value[i] = saved + static_cast<Real>(h);
      const double up = eval();
      p->value[i] = saved - static_cast<Real>(h);
      const double down = eval();
      p->value[i] = saved;
      const double fd = (up - down) / (2.0 * h);
      const double an = static_cast<double>(p->grad[i]);
      const double rel = std::abs(an - fd) / std::max({1.0, std::abs(an), std::abs(fd)});
      ++report.checked;
      if (rel > report.max_rel_err) {
        report.max_rel_err = rel;
        report.worst = p->name + "[" + std::to_string(i) + "]";
      }
    }
  }
  return report;
}

}  // namespace specforge::ad
