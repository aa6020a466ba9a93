#include "cooccur/estimate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include <Eigen/Cholesky>
#include <boost/math/distributions/normal.hpp>

#include "cooccur/optim.hpp"
#include "cooccur/rng.hpp"

namespace cooccur {

namespace {

constexpr double kBoundaryTol = 1e-4;

double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Observed information at theta: central finite differences of the analytic
// gradient, symmetrized.
Eigen::MatrixXd fd_hessian(const ThetaVector& theta, const DetectionHistory& h, double step,
                           int threads) {
  const int dim = static_cast<int>(theta.size());
  Eigen::MatrixXd hess(dim, dim);
  ThetaVector probe = theta;
  for (int j = 0; j < dim; ++j) {
    const double hj = step * std::max(1.0, std::abs(theta[j]));
    probe[j] = theta[j] + hj;
    const ThetaVector g_plus = nll_gradient(probe, h, threads);
    probe[j] = theta[j] - hj;
    const ThetaVector g_minus = nll_gradient(probe, h, threads);
    probe[j] = theta[j];
    hess.col(j) = (g_plus - g_minus) / (2.0 * hj);
  }
  return 0.5 * (hess + hess.transpose());
}

double derived_value(const ThetaVector& theta, int n_species, const DerivedQuantity& q) {
  const OccupancyParams params = theta_to_params(theta, n_species);
  switch (q.kind) {
    case DerivedQuantity::Kind::marginal:
      return marginal_occupancy(params, q.species);
    case DerivedQuantity::Kind::conditional:
      return conditional_occupancy(params, q.species, q.given, q.given_present);
  }
  throw std::logic_error("unknown derived quantity kind");
}

}  // namespace

void FitOptions::validate() const {
  if (n_starts < 1) throw std::invalid_argument("n_starts must be positive");
  if (!(grad_tol > 0.0)) throw std::invalid_argument("grad_tol must be positive");
  if (max_iter < 1) throw std::invalid_argument("max_iter must be at least 1");
  if (!(fd_hessian_step > 0.0)) throw std::invalid_argument("fd_hessian_step must be positive");
  if (threads < 1) throw std::invalid_argument("threads must be at least 1");
}

FitResult fit(const DetectionHistory& h, const FitOptions& opts) {
  opts.validate();
  h.validate();
  if (std::none_of(h.y.begin(), h.y.end(), [](Cell c) { return c != Cell::missing; })) {
    throw std::invalid_argument("history has no surveyed cells");
  }
  const int n_species = h.n_species();
  const int dim = theta_dim(n_species);

  const ObjectiveFn objective = [&](const Eigen::VectorXd& theta, Eigen::VectorXd* grad) {
    return nll_theta(theta, h, grad, opts.threads);
  };

  std::optional<OptimResult> best;       // lowest-NLL converged run
  double best_any_f = std::numeric_limits<double>::infinity();
  double best_any_grad = std::numeric_limits<double>::infinity();
  int n_converged = 0;

  for (int start = 0; start <= opts.n_starts; ++start) {
    ThetaVector x0 = ThetaVector::Zero(dim);
    if (start > 0) {
      Rng rng(Rng::substream(opts.seed, static_cast<std::uint64_t>(start)));
      for (int j = 0; j < dim; ++j) x0[j] = rng.uniform_sym();
    }
    OptimResult run = bfgs_minimize(objective, std::move(x0), opts.grad_tol, opts.max_iter);
    const double grad_norm =
        run.gradient.size() > 0 ? run.gradient.cwiseAbs().maxCoeff() : best_any_grad;
    if (std::isfinite(run.f) && run.f < best_any_f) {
      best_any_f = run.f;
      best_any_grad = grad_norm;
    }
    if (run.converged) {
      ++n_converged;
      if (!best || run.f < best->f) best = std::move(run);
    }
  }

  if (!best) {
    throw FitError("no optimizer start reached the gradient tolerance", best_any_f,
                   best_any_grad);
  }

  FitResult result;
  result.species = h.species;
  result.theta_hat = best->x;
  result.params_hat = theta_to_params(best->x, n_species);
  result.nll = best->f;
  result.converged = true;
  result.n_starts_converged = n_converged;

  const auto near_boundary = [](double prob) {
    return prob < kBoundaryTol || prob > 1.0 - kBoundaryTol;
  };
  for (int k = 0; k < result.params_hat.psi.size(); ++k) {
    if (near_boundary(result.params_hat.psi[k])) result.boundary_warning = true;
  }
  for (int s = 0; s < n_species; ++s) {
    if (near_boundary(result.params_hat.p[s])) result.boundary_warning = true;
  }
  if (result.boundary_warning) {
    warn(&result.warnings,
         "fitted probabilities lie on or near the boundary; "
         "standard errors and intervals may be unreliable");
  }

  const Eigen::MatrixXd info = fd_hessian(result.theta_hat, h, opts.fd_hessian_step, opts.threads);
  if (info.allFinite()) {
    Eigen::LLT<Eigen::MatrixXd> llt(info);
    if (llt.info() == Eigen::Success) {
      result.vcov = llt.solve(Eigen::MatrixXd::Identity(dim, dim));
      result.vcov_available = result.vcov.allFinite();
    }
  }
  if (!result.vcov_available) {
    result.vcov.resize(0, 0);
    warn(&result.warnings,
         "observed information matrix is not positive definite; "
         "variance estimates are unavailable");
  }

  return result;
}

double z_value(double level) {
  if (!(level > 0.0 && level < 1.0)) {
    throw std::invalid_argument("confidence level must be in (0, 1)");
  }
  const boost::math::normal_distribution<double> standard_normal;
  return boost::math::quantile(standard_normal, 0.5 + level / 2.0);
}

IntervalEstimate wald_interval(const FitResult& fit, int coordinate, double level) {
  const int dim = static_cast<int>(fit.theta_hat.size());
  if (coordinate < 0 || coordinate >= dim) {
    throw std::out_of_range("theta coordinate out of range");
  }
  if (!fit.vcov_available) {
    throw std::runtime_error("variance estimates are unavailable; cannot form a Wald interval");
  }
  const double z = z_value(level);
  const double se = std::sqrt(std::max(fit.vcov(coordinate, coordinate), 0.0));
  const double center = fit.theta_hat[coordinate];
  IntervalEstimate interval;
  interval.level = level;
  const int first_p_coordinate = (1 << fit.params_hat.n_species) - 1;
  if (coordinate >= first_p_coordinate) {
    // Detection coordinate: build the interval on the logit scale, then map
    // back so it respects [0, 1].
    interval.point = logistic(center);
    interval.lower = logistic(center - z * se);
    interval.upper = logistic(center + z * se);
  } else {
    interval.point = center;
    interval.lower = center - z * se;
    interval.upper = center + z * se;
  }
  return interval;
}

DerivedQuantity DerivedQuantity::marginal(int species) {
  DerivedQuantity q;
  q.kind = Kind::marginal;
  q.species = species;
  return q;
}

DerivedQuantity DerivedQuantity::conditional(int target, int given, bool given_present) {
  DerivedQuantity q;
  q.kind = Kind::conditional;
  q.species = target;
  q.given = given;
  q.given_present = given_present;
  return q;
}

IntervalEstimate derived_interval(const FitResult& fit, const DerivedQuantity& quantity,
                                  double level) {
  if (!fit.vcov_available) {
    throw std::runtime_error("variance estimates are unavailable; cannot form a delta interval");
  }
  const double z = z_value(level);
  const int n_species = fit.params_hat.n_species;
  const int dim = static_cast<int>(fit.theta_hat.size());
  const double value = derived_value(fit.theta_hat, n_species, quantity);

  Eigen::VectorXd grad(dim);
  ThetaVector probe = fit.theta_hat;
  for (int j = 0; j < dim; ++j) {
    const double hj = 1e-6 * std::max(1.0, std::abs(fit.theta_hat[j]));
    probe[j] = fit.theta_hat[j] + hj;
    const double f_plus = derived_value(probe, n_species, quantity);
    probe[j] = fit.theta_hat[j] - hj;
    const double f_minus = derived_value(probe, n_species, quantity);
    probe[j] = fit.theta_hat[j];
    grad[j] = (f_plus - f_minus) / (2.0 * hj);
  }

  const double variance = grad.dot(fit.vcov * grad);
  const double se = std::sqrt(std::max(variance, 0.0));
  IntervalEstimate interval;
  interval.level = level;
  interval.point = value;
  interval.lower = std::clamp(value - z * se, 0.0, 1.0);
  interval.upper = std::clamp(value + z * se, 0.0, 1.0);
  return interval;
}

std::vector<EstimateRow> estimate_table(const FitResult& fit, double level) {
  const int n_species = fit.params_hat.n_species;
  const int first_p_coordinate = (1 << n_species) - 1;
  std::vector<EstimateRow> rows;

  const auto push = [&rows](std::string quantity, double point,
                            const std::optional<IntervalEstimate>& interval) {
    EstimateRow row;
    row.quantity = std::move(quantity);
    row.point = point;
    if (interval) {
      row.lower = interval->lower;
      row.upper = interval->upper;
      row.has_interval = true;
    }
    rows.push_back(std::move(row));
  };

  for (int s = 0; s < n_species; ++s) {
    std::optional<IntervalEstimate> interval;
    if (fit.vcov_available) interval = wald_interval(fit, first_p_coordinate + s, level);
    push("p:" + fit.species[s], fit.params_hat.p[s], interval);
  }
  for (int s = 0; s < n_species; ++s) {
    const DerivedQuantity q = DerivedQuantity::marginal(s);
    std::optional<IntervalEstimate> interval;
    if (fit.vcov_available) interval = derived_interval(fit, q, level);
    push("marginal:" + fit.species[s], marginal_occupancy(fit.params_hat, s), interval);
  }
  for (int s = 1; s < n_species; ++s) {
    for (const bool present : {true, false}) {
      const DerivedQuantity q = DerivedQuantity::conditional(0, s, present);
      double point;
      try {
        point = conditional_occupancy(fit.params_hat, 0, s, present);
      } catch (const std::domain_error&) {
        continue;  // conditioning event has probability zero at the estimate
      }
      std::optional<IntervalEstimate> interval;
      if (fit.vcov_available) interval = derived_interval(fit, q, level);
      push("conditional:" + fit.species[0] + "|" + fit.species[s] +
               (present ? "=present" : "=absent"),
           point, interval);
    }
  }
  return rows;
}

}  // namespace cooccur
