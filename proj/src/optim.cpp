#include "betr/optim.hpp"

#include <cmath>

namespace betr {

namespace {

Eigen::VectorXd numeric_gradient(const Objective& f, const Eigen::VectorXd& x, double h) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double step = h * std::max(1.0, std::abs(x(i)));
    xp(i) = x(i) + step;
    const double fp = f(xp);
    xp(i) = x(i) - step;
    const double fm = f(xp);
    xp(i) = x(i);
    g(i) = (fp - fm) / (2.0 * step);
  }
  return g;
}

}  // namespace

MinimizeResult bfgs_minimize(const Objective& f, const Eigen::VectorXd& x0,
                             const BfgsOptions& opts) {
  const Eigen::Index n = x0.size();
  MinimizeResult res;
  res.x = x0;
  res.value = f(x0);

  Eigen::MatrixXd h_inv = Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd grad = numeric_gradient(f, res.x, opts.fd_step);

  for (int iter = 0; iter < opts.max_iterations; ++iter) {
    res.iterations = iter + 1;
    if (grad.norm() < opts.grad_tolerance) {
      res.converged = true;
      break;
    }
    Eigen::VectorXd dir = -h_inv * grad;
    double slope = grad.dot(dir);
    if (slope >= 0.0) {  // curvature lost; restart from steepest descent
      h_inv.setIdentity();
      dir = -grad;
      slope = grad.dot(dir);
    }

    // backtracking Armijo line search
    double step = 1.0;
    const double c1 = 1e-4;
    double f_new = res.value;
    Eigen::VectorXd x_new = res.x;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      x_new = res.x + step * dir;
      f_new = f(x_new);
      if (std::isfinite(f_new) && f_new <= res.value + c1 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      res.converged = true;  // no descent possible at machine precision
      break;
    }

    const Eigen::VectorXd grad_new = numeric_gradient(f, x_new, opts.fd_step);
    const Eigen::VectorXd s = x_new - res.x;
    const Eigen::VectorXd y = grad_new - grad;
    const double sy = s.dot(y);
    if (sy > 1e-12) {
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd i_mat = Eigen::MatrixXd::Identity(n, n);
      h_inv = (i_mat - rho * s * y.transpose()) * h_inv * (i_mat - rho * y * s.transpose()) +
              rho * s * s.transpose();
    }

    const double improvement = res.value - f_new;
    res.x = x_new;
    res.value = f_new;
    grad = grad_new;
    if (s.norm() < opts.step_tolerance || improvement < opts.step_tolerance * std::abs(res.value)) {
      res.converged = true;
      break;
    }
  }
  return res;
}

double golden_section_minimize(const std::function<double(double)>& f, double lo, double hi,
                               double rel_tolerance) {
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - phi * (b - a);
  double d = a + phi * (b - a);
  double fc = f(c), fd = f(d);
  while (std::abs(b - a) > rel_tolerance * (std::abs(a) + std::abs(b)) + 1e-300) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + phi * (b - a);
      fd = f(d);
    }
  }
  return (a + b) / 2.0;
}

}  // namespace betr
