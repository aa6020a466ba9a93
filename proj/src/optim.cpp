#include "cooccur/optim.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace cooccur {

namespace {

constexpr double kArmijo = 1e-4;     // sufficient-decrease constant
constexpr double kCurvature = 0.9;   // strong-Wolfe curvature constant
constexpr double kMaxStep = 1e3;
constexpr int kMaxLineSearchEvals = 60;

struct Point {
  double alpha = 0.0;
  double f = 0.0;
  double slope = 0.0;  // directional derivative g . d
  Eigen::VectorXd x;
  Eigen::VectorXd g;
};

double as_finite(double f) {
  return std::isfinite(f) ? f : std::numeric_limits<double>::infinity();
}

class LineSearch {
 public:
  LineSearch(const ObjectiveFn& fg, const Eigen::VectorXd& x0, const Eigen::VectorXd& d,
             double f0, double slope0)
      : fg_(fg), x0_(x0), d_(d), f0_(f0), slope0_(slope0) {}

  Point eval(double alpha) {
    Point pt;
    pt.alpha = alpha;
    pt.x = x0_ + alpha * d_;
    pt.f = as_finite(fg_(pt.x, &pt.g));
    pt.slope = std::isfinite(pt.f) ? pt.g.dot(d_) : 0.0;
    ++evals_;
    return pt;
  }

  bool armijo(const Point& pt) const { return pt.f <= f0_ + kArmijo * pt.alpha * slope0_; }
  bool curvature(const Point& pt) const {
    return std::isfinite(pt.f) && std::abs(pt.slope) <= -kCurvature * slope0_;
  }
  bool exhausted() const { return evals_ >= kMaxLineSearchEvals; }
  int evals() const { return evals_; }

  // Nocedal & Wright zoom: lo always satisfies Armijo with the lowest f seen.
  bool zoom(Point lo, Point hi, Point* out) {
    while (!exhausted()) {
      const double alpha = 0.5 * (lo.alpha + hi.alpha);
      if (!(std::abs(hi.alpha - lo.alpha) > 1e-16 * std::max(1.0, std::abs(lo.alpha)))) {
        if (lo.alpha > 0.0 && armijo(lo)) {
          *out = std::move(lo);
          return true;
        }
        return false;
      }
      Point pt = eval(alpha);
      if (!armijo(pt) || pt.f >= lo.f) {
        hi = std::move(pt);
        continue;
      }
      if (curvature(pt)) {
        *out = std::move(pt);
        return true;
      }
      if (pt.slope * (hi.alpha - lo.alpha) >= 0.0) hi = lo;
      lo = std::move(pt);
    }
    if (lo.alpha > 0.0 && armijo(lo)) {
      *out = std::move(lo);
      return true;
    }
    return false;
  }

  bool search(Point* out) {
    Point prev;
    prev.alpha = 0.0;
    prev.f = f0_;
    prev.slope = slope0_;
    double alpha = 1.0;
    bool first = true;
    while (!exhausted()) {
      Point pt = eval(alpha);
      if (!armijo(pt) || (!first && pt.f >= prev.f)) return zoom(std::move(prev), std::move(pt), out);
      if (curvature(pt)) {
        *out = std::move(pt);
        return true;
      }
      if (pt.slope >= 0.0) return zoom(std::move(pt), std::move(prev), out);
      if (alpha >= kMaxStep) {
        // Flat tail (typical of boundary-drifting parameters): accept the
        // Armijo point rather than expanding forever.
        *out = std::move(pt);
        return true;
      }
      prev = std::move(pt);
      alpha = std::min(2.0 * alpha, kMaxStep);
      first = false;
    }
    return false;
  }

 private:
  const ObjectiveFn& fg_;
  const Eigen::VectorXd& x0_;
  const Eigen::VectorXd& d_;
  double f0_;
  double slope0_;
  int evals_ = 0;
};

}  // namespace

OptimResult bfgs_minimize(const ObjectiveFn& fg, Eigen::VectorXd x0, double grad_tol,
                          int max_iter) {
  if (!(grad_tol > 0.0)) throw std::invalid_argument("grad_tol must be positive");
  if (max_iter < 1) throw std::invalid_argument("max_iter must be positive");

  const Eigen::Index n = x0.size();
  OptimResult result;
  result.x = std::move(x0);
  result.gradient.resize(n);
  result.f = fg(result.x, &result.gradient);
  result.evaluations = 1;
  if (!std::isfinite(result.f)) {
    result.message = "objective not finite at the starting point";
    return result;
  }

  Eigen::MatrixXd inv_hessian = Eigen::MatrixXd::Identity(n, n);
  bool scale_pending = true;

  for (int iter = 0; iter < max_iter; ++iter) {
    result.iterations = iter;
    if (result.gradient.lpNorm<Eigen::Infinity>() < grad_tol) {
      result.converged = true;
      result.message = "gradient tolerance reached";
      return result;
    }

    Eigen::VectorXd direction = -(inv_hessian * result.gradient);
    double slope = result.gradient.dot(direction);
    bool steepest = false;
    if (!(slope < 0.0)) {
      // Curvature estimate went bad; restart from steepest descent.
      inv_hessian.setIdentity();
      scale_pending = true;
      direction = -result.gradient;
      slope = result.gradient.dot(direction);
      steepest = true;
    }

    LineSearch search(fg, result.x, direction, result.f, slope);
    Point next;
    bool found = search.search(&next);
    result.evaluations += search.evals();
    if (!found && !steepest) {
      // A failed search along the quasi-Newton direction usually means the
      // curvature model is stale, not that the point is optimal; retry once
      // along the raw gradient before giving up.
      inv_hessian.setIdentity();
      scale_pending = true;
      direction = -result.gradient;
      slope = result.gradient.dot(direction);
      LineSearch retry(fg, result.x, direction, result.f, slope);
      found = retry.search(&next);
      result.evaluations += retry.evals();
    }
    if (!found) {
      result.message = "line search failed";
      result.converged = result.gradient.lpNorm<Eigen::Infinity>() < grad_tol;
      return result;
    }

    const Eigen::VectorXd step = next.x - result.x;
    const Eigen::VectorXd delta_grad = next.g - result.gradient;
    const double sy = step.dot(delta_grad);
    if (scale_pending && sy > 0.0) {
      const double yy = delta_grad.squaredNorm();
      if (yy > 0.0) inv_hessian *= sy / yy;
      scale_pending = false;
    }
    if (sy > 1e-12 * step.norm() * delta_grad.norm()) {
      const double rho = 1.0 / sy;
      const Eigen::VectorXd hy = inv_hessian * delta_grad;
      // Sherman-Morrison form of the BFGS inverse update.
      inv_hessian.noalias() -= rho * (hy * step.transpose() + step * hy.transpose());
      inv_hessian.noalias() +=
          (rho * rho * delta_grad.dot(hy) + rho) * (step * step.transpose());
    }

    result.x = std::move(next.x);
    result.gradient = std::move(next.g);
    result.f = next.f;
  }
  result.iterations = max_iter;
  result.converged = result.gradient.lpNorm<Eigen::Infinity>() < grad_tol;
  result.message = result.converged ? "gradient tolerance reached" : "iteration limit reached";
  return result;
}

}  // namespace cooccur
