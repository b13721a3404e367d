#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace pepg {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct InvalidInput : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Transition rows are indexed by s * n_actions + a.
struct TabularTables {
  int n_states = 0;
  int n_actions = 0;
  Matrix transition;  // (S*A) x S
  Matrix reward;      // S x A

  static TabularTables zeros(int n_states, int n_actions);

  int row(int s, int a) const { return s * n_actions + a; }
  double p(int s, int a, int next) const { return transition(row(s, a), next); }

  // Throws InvalidInput when rows are not distributions or entries are not finite.
  void validate(double tol = 1e-12) const;
};

// Row-stochastic S x A table of action probabilities.
struct StochasticPolicy {
  Matrix probs;

  int n_states() const { return static_cast<int>(probs.rows()); }
  int n_actions() const { return static_cast<int>(probs.cols()); }
  void validate(double tol = 1e-12) const;
};

struct QAdvantage {
  Matrix q;
  Matrix advantage;
};

struct OccupancyMeasure {
  Matrix d;       // S x A, sums to one
  Vector states;  // state marginal
};

Matrix state_transition(const TabularTables& tables, const StochasticPolicy& policy);
Vector policy_reward(const TabularTables& tables, const StochasticPolicy& policy);

Vector solve_value(const TabularTables& tables, const StochasticPolicy& policy, double gamma);
QAdvantage q_and_advantage(const TabularTables& tables, const Vector& value,
                           const StochasticPolicy& policy, double gamma);
OccupancyMeasure occupancy(const TabularTables& tables, const StochasticPolicy& policy,
                           double gamma, const Vector& rho);

// Reward replaced by r - lambda * log pi. Rejects policies with zero entries.
TabularTables soft_tables(const TabularTables& tables, const StochasticPolicy& policy,
                          double lambda);
Vector solve_soft_value(const TabularTables& tables, const StochasticPolicy& policy,
                        double gamma, double lambda);

// max over (s,a) of num/den. +inf when num has mass where den has none.
double coverage_ratio(const OccupancyMeasure& num, const OccupancyMeasure& den);

double value_at(const Vector& value, const Vector& rho);

struct SoftOptimum {
  Vector value;
  Matrix q;
  StochasticPolicy policy;
  int iterations = 0;
  bool converged = false;
};

// Entropy-regularized value iteration. lambda == 0 gives the greedy policy
// (ties split uniformly).
SoftOptimum solve_soft_optimal(const TabularTables& tables, double gamma, double lambda,
                               double tol = 1e-12, int max_iter = 100000);

// max_s of the soft policy-improvement gain for `policy` in `tables`.
double soft_improvement_gap(const TabularTables& tables, const StochasticPolicy& policy,
                            double gamma, double lambda);

Vector uniform_distribution(int n);

}  // namespace pepg
