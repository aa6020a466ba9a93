#include <cmath>
#include <random>

#include <doctest.h>
#include <Eigen/Dense>

#include "cooccur/optim.hpp"

using namespace cooccur;

namespace {

/// f(x) = 1/2 x'Ax - b'x with SPD A; unique minimizer solves Ax = b.
ObjectiveFn quadratic(const Eigen::MatrixXd& A, const Eigen::VectorXd& b) {
  return [A, b](const Eigen::VectorXd& x, Eigen::VectorXd* g) {
    if (g != nullptr) *g = A * x - b;
    return 0.5 * x.dot(A * x) - b.dot(x);
  };
}

double rosenbrock(const Eigen::VectorXd& x, Eigen::VectorXd* g) {
  double f = 0.0;
  if (g != nullptr) g->setZero(x.size());
  for (int i = 0; i + 1 < x.size(); ++i) {
    const double a = x[i + 1] - x[i] * x[i];
    const double b = 1.0 - x[i];
    f += 100.0 * a * a + b * b;
    if (g != nullptr) {
      (*g)[i] += -400.0 * a * x[i] - 2.0 * b;
      (*g)[i + 1] += 200.0 * a;
    }
  }
  return f;
}

}  // namespace

TEST_CASE("quadratic bowls are solved to the gradient tolerance") {
  std::mt19937 gen(515);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (int trial = 0; trial < 25; ++trial) {
    const int n = 2 + static_cast<int>(gen() % 6);
    Eigen::MatrixXd m(n, n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) m(i, j) = unit(gen);
    }
    const Eigen::MatrixXd A =
        m * m.transpose() + Eigen::MatrixXd::Identity(n, n) * 0.5;  // SPD
    Eigen::VectorXd b(n);
    for (int i = 0; i < n; ++i) b[i] = unit(gen);
    Eigen::VectorXd x0(n);
    for (int i = 0; i < n; ++i) x0[i] = 3.0 * unit(gen);

    // Tolerance sized to what double precision can certify when f* = O(1):
    // near the bowl bottom f-changes scale like |g|^2, so decreases become
    // unmeasurable once |g| ~ sqrt(eps * |f*|).
    const auto result = bfgs_minimize(quadratic(A, b), x0, 1e-8, 200);
    REQUIRE(result.converged);
    CHECK(result.gradient.lpNorm<Eigen::Infinity>() <= 1e-8);
    const Eigen::VectorXd solution = A.ldlt().solve(b);
    for (int i = 0; i < n; ++i) CHECK(result.x[i] == doctest::Approx(solution[i]).epsilon(1e-7));
  }
}

TEST_CASE("rosenbrock valleys are followed to the optimum") {
  for (const int n : {2, 4, 8}) {
    Eigen::VectorXd x0 = Eigen::VectorXd::Constant(n, -1.2);
    for (int i = 1; i < n; i += 2) x0[i] = 1.0;
    const auto result = bfgs_minimize(rosenbrock, x0, 1e-8, 2000);
    REQUIRE(result.converged);
    CHECK(result.f <= 1e-12);
    for (int i = 0; i < n; ++i) CHECK(result.x[i] == doctest::Approx(1.0).epsilon(1e-5));
    CHECK(result.iterations > 0);
    CHECK(result.evaluations >= result.iterations);
  }
}

TEST_CASE("a start at the optimum converges immediately") {
  const Eigen::MatrixXd A = Eigen::MatrixXd::Identity(3, 3);
  const Eigen::VectorXd b = Eigen::VectorXd::Zero(3);
  const auto result = bfgs_minimize(quadratic(A, b), Eigen::VectorXd::Zero(3), 1e-8, 100);
  CHECK(result.converged);
  CHECK(result.iterations == 0);
  CHECK(result.f == 0.0);
}

TEST_CASE("the iteration cap is reported, not hidden") {
  Eigen::VectorXd x0 = Eigen::VectorXd::Constant(2, -1.2);
  const auto result = bfgs_minimize(rosenbrock, x0, 1e-12, 3);
  CHECK_FALSE(result.converged);
  CHECK(result.iterations == 3);
  CHECK(result.message.find("iteration") != std::string::npos);
  // Even a capped run must make progress from the start.
  Eigen::VectorXd g;
  CHECK(result.f < rosenbrock(x0, &g));
}

TEST_CASE("minimization is bit-for-bit deterministic") {
  Eigen::VectorXd x0 = Eigen::VectorXd::Constant(4, -1.2);
  const auto a = bfgs_minimize(rosenbrock, x0, 1e-9, 1000);
  const auto b = bfgs_minimize(rosenbrock, x0, 1e-9, 1000);
  CHECK(a.f == b.f);
  CHECK(a.iterations == b.iterations);
  CHECK(a.evaluations == b.evaluations);
  for (int i = 0; i < a.x.size(); ++i) CHECK(a.x[i] == b.x[i]);
}

TEST_CASE("argument validation") {
  const Eigen::MatrixXd A = Eigen::MatrixXd::Identity(2, 2);
  const Eigen::VectorXd b = Eigen::VectorXd::Ones(2);
  CHECK_THROWS_WITH_AS(bfgs_minimize(quadratic(A, b), Eigen::VectorXd::Zero(2), 0.0, 10),
                       doctest::Contains("grad_tol"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(bfgs_minimize(quadratic(A, b), Eigen::VectorXd::Zero(2), 1e-8, 0),
                       doctest::Contains("max_iter"), std::invalid_argument);
}
