#pragma once

#include "pepg/core_mdp.hpp"
#include "pepg/rng.hpp"

namespace pepg {

// Unconstrained S x A logits.
struct PolicyParams {
  Matrix theta;

  static PolicyParams zeros(int n_states, int n_actions) {
    return {Matrix::Zero(n_states, n_actions)};
  }
  int n_states() const { return static_cast<int>(theta.rows()); }
  int n_actions() const { return static_cast<int>(theta.cols()); }
  int dim() const { return static_cast<int>(theta.size()); }
};

StochasticPolicy softmax(const PolicyParams& params);

// Logits reproducing a strictly positive policy.
PolicyParams logits_of(const StochasticPolicy& policy);

// d log pi(a|s) / d theta(s, b) for every b. Entries for other states are zero.
Eigen::RowVectorXd log_policy_score(const StochasticPolicy& policy, int s, int a);

int sample_action(const StochasticPolicy& policy, int s, Rng& rng);
double policy_entropy(const StochasticPolicy& policy, int s);

// Coordinate index of theta(s, a) in the flattened gradient (column-major,
// matching Eigen storage).
inline int param_index(int n_states, int s, int a) { return a * n_states + s; }

}  // namespace pepg
