#pragma once

#include <cstdint>
#include <vector>

#include "pepg/rng.hpp"

namespace pepg {

struct LoanConfig {
  double sigma = 1.0;      // population std-dev
  double repay_slope = 1.0;
  double repay_offset = 0.0;
  double payoff = 1.0;     // R
  double loss = 2.0;       // L
  double sharpness = 5.0;  // k of the sigmoid policy
  double beta = 0.5;       // performative strength
  double clamp = 2.0;      // M, f(g) = M (2g - 1)
  double mu0 = 0.0;
  // learner start; 0 is the unstable equilibrium of the default model
  double theta0 = -1.0;
  int quadrature_nodes = 64;

  void validate() const;
};

struct GaussHermite {
  std::vector<double> nodes;    // standard normal abscissae
  std::vector<double> weights;  // sum to one
};
GaussHermite gauss_hermite(int n);

double sigmoid(double z);
double loan_policy(const LoanConfig& cfg, double theta, double x);
double loan_expected_reward(const LoanConfig& cfg, double x);  // u(x)
double loan_utility(const LoanConfig& cfg, double theta, double mu);
double loan_grant_rate(const LoanConfig& cfg, double theta, double mu);
double loan_feedback(const LoanConfig& cfg, double grant_rate);  // f(g)

struct LoanEquilibrium {
  double mu = 0.0;
  int iterations = 0;
  bool converged = false;
};
LoanEquilibrium loan_equilibrium_mean(const LoanConfig& cfg, double theta);
double loan_equilibrium_utility(const LoanConfig& cfg, double theta);
// d mu* / d theta by implicit differentiation of the fixed point.
double loan_equilibrium_slope(const LoanConfig& cfg, double theta);

struct LoanOptimum {
  double theta = 0.0;
  double utility = 0.0;
};
LoanOptimum loan_erm_optimum(const LoanConfig& cfg);
LoanOptimum loan_performative_optimum(const LoanConfig& cfg);

// Realized mean payoff of n applicants drawn from N(mu, sigma^2).
double loan_realized_utility(const LoanConfig& cfg, double theta, double mu, int n, Rng& rng);

}  // namespace pepg
