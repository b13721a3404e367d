#include "doctest.h"
#include "pepg/loan.hpp"

#include <cmath>

using namespace pepg;

TEST_CASE("Gauss-Hermite rule integrates Gaussian moments") {
  GaussHermite gh = gauss_hermite(64);
  REQUIRE(gh.nodes.size() == 64);
  double m0 = 0, m1 = 0, m2 = 0, m4 = 0, m6 = 0;
  for (size_t i = 0; i < 64; ++i) {
    double z = gh.nodes[i], w = gh.weights[i];
    m0 += w;
    m1 += w * z;
    m2 += w * z * z;
    m4 += w * std::pow(z, 4);
    m6 += w * std::pow(z, 6);
  }
  CHECK(m0 == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(std::abs(m1) < 1e-12);
  CHECK(m2 == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(m4 == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(m6 == doctest::Approx(15.0).epsilon(1e-11));
}

TEST_CASE("config validation") {
  LoanConfig c;
  c.quadrature_nodes = 32;
  CHECK_THROWS(c.validate());
  c = LoanConfig{};
  c.sigma = 0.0;
  CHECK_THROWS(c.validate());
  c = LoanConfig{};
  c.beta = 1.5;
  CHECK_THROWS(c.validate());
}

TEST_CASE("symmetric payoff with coin-flip repayment has zero utility") {
  LoanConfig c;
  c.payoff = c.loss = 1.0;
  c.repay_slope = 0.0;
  c.repay_offset = 0.0;
  for (double th : {-2.0, 0.0, 1.5})
    for (double mu : {-1.0, 0.3}) CHECK(std::abs(loan_utility(c, th, mu)) < 1e-15);
}

TEST_CASE("granting nothing gives zero utility") {
  LoanConfig c;
  CHECK(std::abs(loan_utility(c, 50.0, 0.0)) < 1e-12);
}

TEST_CASE("quadrature utility matches Monte Carlo") {
  LoanConfig c;
  c.sigma = 1.3;
  const double theta = 0.4, mu = 0.2;
  Rng rng(1);
  const int n = 1000000;
  double sum = 0, sum2 = 0;
  for (int i = 0; i < n; ++i) {
    double x = mu + c.sigma * rng.normal();
    double v = loan_policy(c, theta, x) * loan_expected_reward(c, x);
    sum += v;
    sum2 += v * v;
  }
  double mean = sum / n, se = std::sqrt((sum2 / n - mean * mean) / n);
  CHECK(std::abs(loan_utility(c, theta, mu) - mean) < 3 * se);
}

TEST_CASE("realized utility is an unbiased draw of the utility") {
  LoanConfig c;
  Rng rng(2);
  const int reps = 400, n = 2000;
  double sum = 0, sum2 = 0;
  for (int r = 0; r < reps; ++r) {
    double u = loan_realized_utility(c, 0.3, -0.2, n, rng);
    sum += u;
    sum2 += u * u;
  }
  double mean = sum / reps, se = std::sqrt((sum2 / reps - mean * mean) / reps);
  CHECK(std::abs(mean - loan_utility(c, 0.3, -0.2)) < 3.5 * se);
}

TEST_CASE("no performativity keeps the initial mean") {
  LoanConfig c;
  c.beta = 0.0;
  c.mu0 = 0.7;
  LoanEquilibrium eq = loan_equilibrium_mean(c, 0.1);
  CHECK(eq.converged);
  CHECK(eq.mu == 0.7);
  CHECK(loan_equilibrium_slope(c, 0.1) == 0.0);
}

TEST_CASE("constant feedback is the equilibrium for any beta") {
  LoanConfig c;
  c.clamp = 0.0;  // f == 0
  c.mu0 = 1.5;
  for (double beta : {0.1, 0.5, 1.0}) {
    c.beta = beta;
    LoanEquilibrium eq = loan_equilibrium_mean(c, -0.4);
    CHECK(eq.converged);
    CHECK(std::abs(eq.mu) < 1e-9);
  }
}

TEST_CASE("equilibrium is a fixed point and stays in the clamp range") {
  LoanConfig c;
  for (double th : {-3.0, -0.5, 0.0, 0.8, 3.0}) {
    LoanEquilibrium eq = loan_equilibrium_mean(c, th);
    CHECK(eq.converged);
    double mapped = (1 - c.beta) * eq.mu + c.beta * loan_feedback(c, loan_grant_rate(c, th, eq.mu));
    CHECK(std::abs(mapped - eq.mu) < 1e-9);
    CHECK(eq.mu >= std::min(c.mu0, -c.clamp) - 1e-12);
    CHECK(eq.mu <= std::max(c.mu0, c.clamp) + 1e-12);
  }
}

TEST_CASE("equilibrium slope matches finite differences") {
  LoanConfig c;
  for (double th : {-1.0, 0.2, 1.3}) {
    const double h = 1e-5;
    double fd = (loan_equilibrium_mean(c, th + h).mu - loan_equilibrium_mean(c, th - h).mu) / (2 * h);
    CHECK(loan_equilibrium_slope(c, th) == doctest::Approx(fd).epsilon(1e-4));
  }
}

TEST_CASE("optima are stationary and ordered as expected") {
  LoanConfig c;
  LoanOptimum erm = loan_erm_optimum(c), perf = loan_performative_optimum(c);
  for (double d : {-0.01, 0.01}) {
    CHECK(loan_utility(c, erm.theta + d, c.mu0) <= erm.utility + 1e-12);
    CHECK(loan_equilibrium_utility(c, perf.theta + d) <= perf.utility + 1e-12);
  }
  CHECK(perf.utility > loan_equilibrium_utility(c, erm.theta));
  c.beta = 0.0;
  CHECK(loan_performative_optimum(c).theta == doctest::Approx(loan_erm_optimum(c).theta).epsilon(1e-6));
}
