#include "cooccur/model.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "cooccur/parallel.hpp"

namespace cooccur {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void check_species_count(int n_species) {
  if (n_species < 1) throw std::invalid_argument("need at least one species");
  if (n_species > kMaxSpecies) throw std::invalid_argument("latent state space too large");
}

/// Detections and surveyed occasions per (species, site). Detection
/// probabilities are species-specific and constant over occasions, so these
/// counts are sufficient for the likelihood.
struct SuffStats {
  int S = 0;
  int I = 0;
  std::vector<int> detections;  // S*I
  std::vector<int> surveyed;    // S*I

  int d(int s, int i) const { return detections[static_cast<std::size_t>(s) * I + i]; }
  int n(int s, int i) const { return surveyed[static_cast<std::size_t>(s) * I + i]; }
};

SuffStats suff_stats(const DetectionHistory& h) {
  SuffStats st;
  st.S = h.n_species();
  st.I = h.n_sites();
  st.detections.assign(static_cast<std::size_t>(st.S) * st.I, 0);
  st.surveyed.assign(static_cast<std::size_t>(st.S) * st.I, 0);
  for (int s = 0; s < st.S; ++s) {
    for (int i = 0; i < st.I; ++i) {
      int d = 0, n = 0;
      for (int t = 0; t < h.n_occasions(); ++t) {
        const Cell c = h.at(s, i, t);
        if (c == Cell::missing) continue;
        ++n;
        if (c == Cell::detection) ++d;
      }
      st.detections[static_cast<std::size_t>(s) * st.I + i] = d;
      st.surveyed[static_cast<std::size_t>(s) * st.I + i] = n;
    }
  }
  return st;
}

/// Log joint likelihood of site i's data under latent state z, log psi[z]
/// included. Returns -inf for states incompatible with an observed detection.
double state_log_term(const SuffStats& st, const Eigen::VectorXd& log_psi,
                      const Eigen::VectorXd& log_p, const Eigen::VectorXd& log_1mp, int z,
                      int i) {
  double lt = log_psi[z];
  for (int s = 0; s < st.S; ++s) {
    const int d = st.d(s, i);
    const int n = st.n(s, i);
    if ((z >> s) & 1) {
      if (d > 0) lt += d * log_p[s];
      if (n > d) lt += (n - d) * log_1mp[s];
    } else if (d > 0) {
      return kNegInf;
    }
  }
  return lt;
}

void check_params_shape(const OccupancyParams& params) {
  check_species_count(params.n_species);
  if (params.psi.size() != (Eigen::Index{1} << params.n_species))
    throw std::invalid_argument("psi length must be 2^S");
  if (params.p.size() != params.n_species)
    throw std::invalid_argument("p length must equal the species count");
}

}  // namespace

std::string state_label(int state, int n_species) {
  std::string label(static_cast<std::size_t>(n_species), '0');
  for (int s = 0; s < n_species; ++s) {
    if ((state >> s) & 1) label[static_cast<std::size_t>(s)] = '1';
  }
  return label;
}

int state_from_label(const std::string& label) {
  if (label.empty() || label.size() > static_cast<std::size_t>(kMaxSpecies))
    throw std::invalid_argument("bad state label '" + label + "'");
  int state = 0;
  for (std::size_t s = 0; s < label.size(); ++s) {
    if (label[s] == '1')
      state |= 1 << s;
    else if (label[s] != '0')
      throw std::invalid_argument("bad state label '" + label + "'");
  }
  return state;
}

OccupancyParams make_params(Eigen::VectorXd psi, Eigen::VectorXd p) {
  OccupancyParams params;
  params.n_species = static_cast<int>(p.size());
  check_species_count(params.n_species);
  if (psi.size() != (Eigen::Index{1} << params.n_species))
    throw std::invalid_argument("psi length must be 2^S");
  if ((psi.array() < 0.0).any() || (psi.array() > 1.0).any())
    throw std::invalid_argument("psi entries must lie in [0, 1]");
  if ((p.array() < 0.0).any() || (p.array() > 1.0).any())
    throw std::invalid_argument("detection probabilities must lie in [0, 1]");
  const double total = psi.sum();
  if (std::abs(total - 1.0) > 1e-9)
    throw std::invalid_argument("psi must sum to 1");
  params.psi = psi / total;
  params.p = std::move(p);
  return params;
}

int theta_dim(int n_species) {
  check_species_count(n_species);
  return ((1 << n_species) - 1) + n_species;
}

OccupancyParams theta_to_params(const ThetaVector& theta, int n_species) {
  const int dim = theta_dim(n_species);
  if (theta.size() != dim)
    throw std::invalid_argument("theta length " + std::to_string(theta.size()) +
                                " does not match " + std::to_string(dim) + " for S = " +
                                std::to_string(n_species));
  const int n_states = 1 << n_species;
  OccupancyParams params;
  params.n_species = n_species;
  params.psi.resize(n_states);
  // Softmax over [0, theta_1, ..., theta_{2^S-1}]; the all-absent state is
  // the fixed reference coordinate.
  double max_eta = 0.0;
  for (int z = 1; z < n_states; ++z) max_eta = std::max(max_eta, theta[z - 1]);
  double total = 0.0;
  for (int z = 0; z < n_states; ++z) {
    const double eta = z == 0 ? 0.0 : theta[z - 1];
    params.psi[z] = std::exp(eta - max_eta);
    total += params.psi[z];
  }
  params.psi /= total;
  params.p.resize(n_species);
  for (int s = 0; s < n_species; ++s) params.p[s] = logistic(theta[n_states - 1 + s]);
  return params;
}

ThetaVector params_to_theta(const OccupancyParams& params) {
  check_params_shape(params);
  const int n_states = 1 << params.n_species;
  if ((params.psi.array() <= 0.0).any() || (params.p.array() <= 0.0).any() ||
      (params.p.array() >= 1.0).any())
    throw std::invalid_argument("boundary parameters have no unconstrained coordinates");
  ThetaVector theta(theta_dim(params.n_species));
  const double log_ref = std::log(params.psi[0]);
  for (int z = 1; z < n_states; ++z) theta[z - 1] = std::log(params.psi[z]) - log_ref;
  for (int s = 0; s < params.n_species; ++s)
    theta[n_states - 1 + s] = std::log(params.p[s]) - std::log1p(-params.p[s]);
  return theta;
}

double neg_log_likelihood(const OccupancyParams& params, const DetectionHistory& h,
                          int threads) {
  check_params_shape(params);
  if (params.n_species != h.n_species())
    throw std::invalid_argument("parameter and history species counts differ");
  const SuffStats st = suff_stats(h);
  const int n_states = 1 << st.S;

  Eigen::VectorXd log_psi(n_states), log_p(st.S), log_1mp(st.S);
  for (int z = 0; z < n_states; ++z)
    log_psi[z] = params.psi[z] > 0.0 ? std::log(params.psi[z]) : kNegInf;
  for (int s = 0; s < st.S; ++s) {
    log_p[s] = params.p[s] > 0.0 ? std::log(params.p[s]) : kNegInf;
    log_1mp[s] = params.p[s] < 1.0 ? std::log1p(-params.p[s]) : kNegInf;
  }

  std::vector<double> site_nll(static_cast<std::size_t>(st.I), 0.0);
  parallel_blocks(static_cast<std::size_t>(st.I), threads, [&](std::size_t begin, std::size_t end) {
    std::vector<double> lt(static_cast<std::size_t>(n_states));
    for (std::size_t i = begin; i < end; ++i) {
      const int site = static_cast<int>(i);
      bool surveyed = false;
      for (int s = 0; s < st.S; ++s) surveyed = surveyed || st.n(s, site) > 0;
      if (!surveyed) continue;  // no effort, exactly zero contribution
      double max_lt = kNegInf;
      for (int z = 0; z < n_states; ++z) {
        lt[static_cast<std::size_t>(z)] =
            state_log_term(st, log_psi, log_p, log_1mp, z, site);
        max_lt = std::max(max_lt, lt[static_cast<std::size_t>(z)]);
      }
      if (max_lt == kNegInf) {
        site_nll[i] = std::numeric_limits<double>::infinity();  // impossible data
        continue;
      }
      double sum = 0.0;
      for (int z = 0; z < n_states; ++z) {
        const double v = lt[static_cast<std::size_t>(z)];
        if (v != kNegInf) sum += std::exp(v - max_lt);
      }
      site_nll[i] = -(max_lt + std::log(sum));
    }
  });

  double nll = 0.0;
  for (const double v : site_nll) nll += v;  // fixed site order
  return nll;
}

double nll_theta(const ThetaVector& theta, const DetectionHistory& h, ThetaVector* gradient,
                 int threads) {
  const int S = h.n_species();
  const OccupancyParams params = theta_to_params(theta, S);
  if (gradient == nullptr) return neg_log_likelihood(params, h, threads);

  const SuffStats st = suff_stats(h);
  const int n_states = 1 << S;
  const int dim = theta_dim(S);

  Eigen::VectorXd log_psi(n_states), log_p(S), log_1mp(S);
  for (int z = 0; z < n_states; ++z) log_psi[z] = std::log(params.psi[z]);
  for (int s = 0; s < S; ++s) {
    log_p[s] = std::log(params.p[s]);
    log_1mp[s] = std::log1p(-params.p[s]);
  }

  std::vector<double> site_nll(static_cast<std::size_t>(st.I), 0.0);
  // Per-site gradient contributions, reduced in site order afterwards so the
  // result does not depend on the thread count.
  Eigen::MatrixXd site_grad = Eigen::MatrixXd::Zero(dim, st.I);

  parallel_blocks(static_cast<std::size_t>(st.I), threads, [&](std::size_t begin, std::size_t end) {
    std::vector<double> lt(static_cast<std::size_t>(n_states));
    std::vector<double> posterior(static_cast<std::size_t>(n_states));
    for (std::size_t i = begin; i < end; ++i) {
      const int site = static_cast<int>(i);
      bool surveyed = false;
      for (int s = 0; s < S; ++s) surveyed = surveyed || st.n(s, site) > 0;
      if (!surveyed) continue;
      double max_lt = kNegInf;
      for (int z = 0; z < n_states; ++z) {
        lt[static_cast<std::size_t>(z)] =
            state_log_term(st, log_psi, log_p, log_1mp, z, site);
        max_lt = std::max(max_lt, lt[static_cast<std::size_t>(z)]);
      }
      double sum = 0.0;
      for (int z = 0; z < n_states; ++z) {
        const double v = lt[static_cast<std::size_t>(z)];
        posterior[static_cast<std::size_t>(z)] = v == kNegInf ? 0.0 : std::exp(v - max_lt);
        sum += posterior[static_cast<std::size_t>(z)];
      }
      site_nll[i] = -(max_lt + std::log(sum));
      for (int z = 0; z < n_states; ++z) posterior[static_cast<std::size_t>(z)] /= sum;

      auto col = site_grad.col(static_cast<Eigen::Index>(i));
      // d NLL_i / d eta_z = psi_z - posterior_z for the non-reference states.
      for (int z = 1; z < n_states; ++z)
        col[z - 1] = params.psi[z] - posterior[static_cast<std::size_t>(z)];
      // d NLL_i / d logit(p_s) = Pr(s present | data_i) * (n*p - d).
      for (int s = 0; s < S; ++s) {
        double present = 0.0;
        for (int z = 0; z < n_states; ++z) {
          if ((z >> s) & 1) present += posterior[static_cast<std::size_t>(z)];
        }
        col[n_states - 1 + s] =
            present * (st.n(s, site) * params.p[s] - st.d(s, site));
      }
    }
  });

  double nll = 0.0;
  ThetaVector grad = ThetaVector::Zero(dim);
  for (int i = 0; i < st.I; ++i) {
    nll += site_nll[static_cast<std::size_t>(i)];
    grad += site_grad.col(i);
  }
  *gradient = std::move(grad);
  return nll;
}

ThetaVector nll_gradient(const ThetaVector& theta, const DetectionHistory& h, int threads) {
  ThetaVector grad;
  nll_theta(theta, h, &grad, threads);
  return grad;
}

double marginal_occupancy(const OccupancyParams& params, int species) {
  check_params_shape(params);
  if (species < 0 || species >= params.n_species)
    throw std::out_of_range("species index out of range");
  const int n_states = 1 << params.n_species;
  double total = 0.0;
  for (int z = 0; z < n_states; ++z) {
    if ((z >> species) & 1) total += params.psi[z];
  }
  return total;
}

double conditional_occupancy(const OccupancyParams& params, int target, int given,
                             bool given_present) {
  check_params_shape(params);
  if (target < 0 || target >= params.n_species || given < 0 || given >= params.n_species)
    throw std::out_of_range("species index out of range");
  if (target == given)
    throw std::invalid_argument("conditional target and conditioning species must differ");
  const int n_states = 1 << params.n_species;
  double numerator = 0.0, denominator = 0.0;
  for (int z = 0; z < n_states; ++z) {
    if ((((z >> given) & 1) != 0) != given_present) continue;
    denominator += params.psi[z];
    if ((z >> target) & 1) numerator += params.psi[z];
  }
  if (denominator == 0.0) throw std::domain_error("conditioning on null event");
  return numerator / denominator;
}

}  // namespace cooccur
