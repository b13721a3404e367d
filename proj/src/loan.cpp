#include "pepg/loan.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <map>
#include <mutex>

#include "pepg/core_mdp.hpp"

namespace pepg {

void LoanConfig::validate() const {
  if (!(sigma > 0.0)) throw InvalidInput("loan sigma must be positive");
  if (!(beta >= 0.0 && beta <= 1.0)) throw InvalidInput("loan beta must lie in [0, 1]");
  if (!(clamp >= 0.0)) throw InvalidInput("loan clamp must be non-negative");
  if (!(sharpness > 0.0)) throw InvalidInput("loan sharpness must be positive");
  if (quadrature_nodes < 64) throw InvalidInput("loan quadrature needs at least 64 nodes");
  if (!std::isfinite(mu0) || !std::isfinite(theta0)) throw InvalidInput("loan mu0 and theta0 must be finite");
}

GaussHermite gauss_hermite(int n) {
  static std::mutex mu;
  static std::map<int, GaussHermite> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  // Golub-Welsch on the probabilists' Hermite recurrence
  Matrix jacobi = Matrix::Zero(n, n);
  for (int i = 1; i < n; ++i) jacobi(i, i - 1) = jacobi(i - 1, i) = std::sqrt(double(i));
  Eigen::SelfAdjointEigenSolver<Matrix> eig(jacobi);
  GaussHermite gh;
  for (int i = 0; i < n; ++i) {
    gh.nodes.push_back(eig.eigenvalues()(i));
    double v = eig.eigenvectors()(0, i);
    gh.weights.push_back(v * v);
  }
  cache[n] = gh;
  return gh;
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  double e = std::exp(z);
  return e / (1.0 + e);
}

double loan_policy(const LoanConfig& cfg, double theta, double x) {
  return sigmoid(cfg.sharpness * (x - theta));
}

double loan_expected_reward(const LoanConfig& cfg, double x) {
  double p = sigmoid(cfg.repay_slope * x - cfg.repay_offset);
  return p * cfg.payoff - (1.0 - p) * cfg.loss;
}

namespace {

double gaussian_mean(const LoanConfig& cfg, double mu, const std::function<double(double)>& fn) {
  GaussHermite gh = gauss_hermite(cfg.quadrature_nodes);
  double acc = 0.0;
  for (size_t i = 0; i < gh.nodes.size(); ++i) acc += gh.weights[i] * fn(mu + cfg.sigma * gh.nodes[i]);
  return acc;
}

LoanOptimum maximize(const std::function<double(double)>& objective) {
  const double lo = -8.0, hi = 8.0, step = 0.02;
  double best_t = lo, best_u = objective(lo);
  for (double t = lo + step; t <= hi + 1e-12; t += step) {
    double u = objective(t);
    if (u > best_u) {
      best_u = u;
      best_t = t;
    }
  }
  // golden-section refinement on the bracketing cell pair
  double a = best_t - step, b = best_t + step;
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - inv_phi * (b - a), d = a + inv_phi * (b - a);
  double fc = objective(c), fd = objective(d);
  while (b - a > 1e-9) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = objective(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = objective(d);
    }
  }
  double t = 0.5 * (a + b), u = objective(t);
  if (u < best_u) return {best_t, best_u};
  return {t, u};
}

}  // namespace

double loan_utility(const LoanConfig& cfg, double theta, double mu) {
  cfg.validate();
  return gaussian_mean(cfg, mu, [&](double x) {
    return loan_policy(cfg, theta, x) * loan_expected_reward(cfg, x);
  });
}

double loan_grant_rate(const LoanConfig& cfg, double theta, double mu) {
  cfg.validate();
  return gaussian_mean(cfg, mu, [&](double x) { return loan_policy(cfg, theta, x); });
}

double loan_feedback(const LoanConfig& cfg, double g) { return cfg.clamp * (2.0 * g - 1.0); }

LoanEquilibrium loan_equilibrium_mean(const LoanConfig& cfg, double theta) {
  cfg.validate();
  LoanEquilibrium eq;
  eq.mu = cfg.mu0;
  for (int it = 1; it <= 100000; ++it) {
    double next = (1.0 - cfg.beta) * eq.mu +
                  cfg.beta * loan_feedback(cfg, loan_grant_rate(cfg, theta, eq.mu));
    double delta = std::abs(next - eq.mu);
    eq.mu = next;
    eq.iterations = it;
    if (delta <= 1e-10) {
      eq.converged = true;
      break;
    }
  }
  return eq;
}

double loan_equilibrium_utility(const LoanConfig& cfg, double theta) {
  return loan_utility(cfg, theta, loan_equilibrium_mean(cfg, theta).mu);
}

double loan_equilibrium_slope(const LoanConfig& cfg, double theta) {
  if (cfg.beta == 0.0) return 0.0;
  double mu = loan_equilibrium_mean(cfg, theta).mu;
  // g = E[sigmoid(k (mu + sigma z - theta))]: dg/dmu = -dg/dtheta
  double dg_dmu = gaussian_mean(cfg, mu, [&](double x) {
    double p = loan_policy(cfg, theta, x);
    return cfg.sharpness * p * (1.0 - p);
  });
  double fprime = 2.0 * cfg.clamp;
  return -fprime * dg_dmu / (1.0 - fprime * dg_dmu);
}

LoanOptimum loan_erm_optimum(const LoanConfig& cfg) {
  cfg.validate();
  return maximize([&](double t) { return loan_utility(cfg, t, cfg.mu0); });
}

LoanOptimum loan_performative_optimum(const LoanConfig& cfg) {
  cfg.validate();
  return maximize([&](double t) { return loan_equilibrium_utility(cfg, t); });
}

double loan_realized_utility(const LoanConfig& cfg, double theta, double mu, int n, Rng& rng) {
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    double x = mu + cfg.sigma * rng.normal();
    double grant = rng.uniform(), repay = rng.uniform();
    if (grant < loan_policy(cfg, theta, x))
      total += repay < sigmoid(cfg.repay_slope * x - cfg.repay_offset) ? cfg.payoff : -cfg.loss;
  }
  return total / n;
}

}  // namespace pepg
