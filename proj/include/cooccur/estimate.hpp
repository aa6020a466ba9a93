#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "cooccur/common.hpp"
#include "cooccur/model.hpp"
#include "cooccur/survey.hpp"

namespace cooccur {

struct FitOptions {
  int n_starts = 5;                  // random starts (>= 1), plus one start at theta = 0
  std::uint64_t seed = kDefaultSeed;
  double grad_tol = 1e-6;
  int max_iter = 500;
  double fd_hessian_step = 1e-4;
  int threads = 1;

  void validate() const;
};

/// Maximum-likelihood fit. vcov is the inverse of the observed information
/// (central finite differences of the analytic gradient) over theta
/// coordinates; vcov_available is false when that matrix is singular or not
/// positive definite.
struct FitResult {
  std::vector<SpeciesLabel> species;
  ThetaVector theta_hat;
  OccupancyParams params_hat;
  double nll = 0.0;
  Eigen::MatrixXd vcov;
  bool vcov_available = false;
  bool converged = false;
  int n_starts_converged = 0;
  bool boundary_warning = false;
  Warnings warnings;
};

/// Raised when no optimizer start reaches the gradient tolerance; carries the
/// best diagnostics seen.
class FitError : public std::runtime_error {
 public:
  FitError(std::string message, double best_nll, double best_grad_inf_norm)
      : std::runtime_error(std::move(message)),
        best_nll(best_nll),
        best_grad_inf_norm(best_grad_inf_norm) {}
  double best_nll;
  double best_grad_inf_norm;
};

struct IntervalEstimate {
  double point = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double level = 0.95;
};

/// Runs n_starts seeded Uniform(-1,1) starts plus the zero start, each
/// through BFGS, and keeps the converged run with the lowest negative
/// log-likelihood (ties broken by start index). Deterministic for a given
/// (history, options) pair.
FitResult fit(const DetectionHistory& h, const FitOptions& opts = {});

/// Standard-normal quantile for a two-sided interval at the given level
/// (z = 1.959964 at 0.95).
double z_value(double level);

/// Wald interval for one theta coordinate. Detection coordinates are mapped
/// through the logistic function so the interval lives in [0, 1]; the psi
/// multinomial-logit coordinates are reported on the unconstrained scale.
IntervalEstimate wald_interval(const FitResult& fit, int coordinate, double level = 0.95);

/// A probability-scale function of the fitted parameters.
struct DerivedQuantity {
  enum class Kind { marginal, conditional };
  Kind kind = Kind::marginal;
  int species = 0;          // marginal species, or conditional target
  int given = -1;           // conditional only
  bool given_present = true;

  static DerivedQuantity marginal(int species);
  static DerivedQuantity conditional(int target, int given, bool given_present);
};

/// Delta-method interval: gradient of the quantity with respect to theta by
/// central finite differences, variance g' V g, clipped to [0, 1].
IntervalEstimate derived_interval(const FitResult& fit, const DerivedQuantity& quantity,
                                  double level = 0.95);

/// One labelled estimate for report tables: detection probabilities, marginal
/// occupancies, and the first species' occupancy conditional on each other
/// species. Interval fields are meaningful only when has_interval is set
/// (vcov available).
struct EstimateRow {
  std::string quantity;  // "p:lynx", "marginal:lynx", "conditional:lynx|roe=present"
  double point = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  bool has_interval = false;
};

std::vector<EstimateRow> estimate_table(const FitResult& fit, double level = 0.95);

}  // namespace cooccur
