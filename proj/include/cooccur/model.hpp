#pragma once

#include <vector>

#include <Eigen/Core>

#include "cooccur/common.hpp"
#include "cooccur/survey.hpp"

namespace cooccur {

/// Multispecies occupancy parameters. The latent occupancy state of a site is
/// one of 2^S presence/absence configurations; state index z encodes species
/// s as bit s (species 0 = least significant bit). psi is the probability
/// simplex over those states; p holds one detection probability per species.
struct OccupancyParams {
  int n_species = 0;
  Eigen::VectorXd psi;  // length 2^S, sums to 1
  Eigen::VectorXd p;    // length S
};

/// State index -> "0110"-style label, one character per species in registry
/// order (leftmost = species 0).
std::string state_label(int state, int n_species);
int state_from_label(const std::string& label);

/// Validates shapes, simplex and [0,1] ranges, then renormalizes psi so its
/// sum is exactly representable as 1 within a few ulp. Boundary values (0 or
/// 1) are allowed here; only the unconstrained parameterization requires the
/// interior.
OccupancyParams make_params(Eigen::VectorXd psi, Eigen::VectorXd p);

/// Unconstrained coordinates: multinomial-logit of psi against the all-absent
/// reference state, followed by logit(p_s). Length (2^S - 1) + S.
using ThetaVector = Eigen::VectorXd;

int theta_dim(int n_species);
OccupancyParams theta_to_params(const ThetaVector& theta, int n_species);
/// Inverse of theta_to_params; requires interior parameters.
ThetaVector params_to_theta(const OccupancyParams& params);

/// Exact negative log-likelihood of a detection history: for every site the
/// 2^S latent states are marginalized with log-sum-exp; detections under an
/// absent state contribute zero likelihood to that state (never an error);
/// sites with no effort contribute exactly 0.
///
/// Per-site terms are independent; with threads > 1 they are computed in
/// parallel and always reduced in site order, so the result is bit-identical
/// for any thread count.
double neg_log_likelihood(const OccupancyParams& params, const DetectionHistory& h,
                          int threads = 1);

/// neg_log_likelihood composed with theta_to_params, optionally with its
/// analytic gradient with respect to theta (posterior-weighted chain rule
/// through softmax and logistic).
double nll_theta(const ThetaVector& theta, const DetectionHistory& h,
                 ThetaVector* gradient = nullptr, int threads = 1);

ThetaVector nll_gradient(const ThetaVector& theta, const DetectionHistory& h,
                         int threads = 1);

/// Pr(species present) = sum of psi over states with that species' bit set.
double marginal_occupancy(const OccupancyParams& params, int species);

/// Pr(Z_target = 1 | Z_given = given_present). Throws std::domain_error when
/// the conditioning event has probability zero.
double conditional_occupancy(const OccupancyParams& params, int target, int given,
                             bool given_present);

}  // namespace cooccur
