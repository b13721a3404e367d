#include "pepg/policy.hpp"

#include <cmath>

namespace pepg {

StochasticPolicy softmax(const PolicyParams& params) {
  const Matrix& th = params.theta;
  if (th.size() == 0) throw InvalidInput("empty parameters");
  if (!th.allFinite()) throw InvalidInput("non-finite policy parameters");
  StochasticPolicy pi;
  pi.probs.resize(th.rows(), th.cols());
  for (int s = 0; s < th.rows(); ++s) {
    Eigen::RowVectorXd e = (th.row(s).array() - th.row(s).maxCoeff()).exp();
    pi.probs.row(s) = e / e.sum();
  }
  return pi;
}

PolicyParams logits_of(const StochasticPolicy& policy) {
  if ((policy.probs.array() <= 0.0).any())
    throw InvalidInput("logits_of needs a strictly positive policy");
  return {policy.probs.array().log().matrix()};
}

Eigen::RowVectorXd log_policy_score(const StochasticPolicy& policy, int s, int a) {
  Eigen::RowVectorXd g = -policy.probs.row(s);
  g(a) += 1.0;
  return g;
}

int sample_action(const StochasticPolicy& policy, int s, Rng& rng) {
  Eigen::RowVectorXd row = policy.probs.row(s);
  return rng.categorical(row.data(), static_cast<int>(row.size()));
}

double policy_entropy(const StochasticPolicy& policy, int s) {
  double h = 0.0;
  for (int a = 0; a < policy.n_actions(); ++a) {
    double p = policy.probs(s, a);
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

}  // namespace pepg
