#pragma once

#include <functional>
#include <string>

#include <Eigen/Core>

namespace cooccur {

/// Objective callback: returns f(x) and fills *gradient when non-null.
using ObjectiveFn = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd*)>;

struct OptimResult {
  Eigen::VectorXd x;
  Eigen::VectorXd gradient;
  double f = 0.0;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
  std::string message;
};

/// Dense BFGS with a strong-Wolfe line search (bracket + zoom). Convergence
/// is declared when the gradient infinity norm drops below grad_tol. Fully
/// deterministic: no randomness, no dependence on thread count.
OptimResult bfgs_minimize(const ObjectiveFn& fg, Eigen::VectorXd x0, double grad_tol,
                          int max_iter);

}  // namespace cooccur
