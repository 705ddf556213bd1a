#pragma once

#include <Eigen/Core>
#include <functional>

namespace betr {

using Objective = std::function<double(const Eigen::VectorXd&)>;

struct MinimizeResult {
  Eigen::VectorXd x;
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
};

struct BfgsOptions {
  int max_iterations = 500;
  double grad_tolerance = 1e-9;
  double step_tolerance = 1e-12;
  double fd_step = 1e-6;  // central-difference step for numeric gradients
};

// BFGS with numerically differentiated gradients and backtracking Armijo
// line search.
MinimizeResult bfgs_minimize(const Objective& f, const Eigen::VectorXd& x0,
                             const BfgsOptions& opts = {});

// Golden-section minimization of a unimodal 1-D function on [lo, hi].
double golden_section_minimize(const std::function<double(double)>& f, double lo, double hi,
                               double rel_tolerance = 1e-10);

}  // namespace betr
