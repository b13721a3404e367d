#include "pepg/core_mdp.hpp"

#include <cmath>
#include <limits>

namespace pepg {

namespace {

constexpr double kZeroProb = 1e-300;

void require_shapes(const TabularTables& tables, const StochasticPolicy& policy) {
  if (policy.n_states() != tables.n_states || policy.n_actions() != tables.n_actions)
    throw InvalidInput("policy shape does not match tables");
}

void require_gamma(double gamma) {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw InvalidInput("gamma must lie in [0, 1)");
}

Vector solve_linear_value(const TabularTables& tables, const StochasticPolicy& policy,
                          const Vector& r_pi, double gamma) {
  if (gamma == 0.0) return r_pi;
  const int S = tables.n_states;
  Matrix system = Matrix::Identity(S, S) - gamma * state_transition(tables, policy);
  Eigen::PartialPivLU<Matrix> lu(system);
  Vector v = lu.solve(r_pi);
  // one refinement step keeps the residual near machine precision
  Vector resid = r_pi - system * v;
  v += lu.solve(resid);
  return v;
}

double log_sum_exp(const Eigen::Ref<const Eigen::RowVectorXd>& x) {
  double m = x.maxCoeff();
  return m + std::log((x.array() - m).exp().sum());
}

}  // namespace

TabularTables TabularTables::zeros(int n_states, int n_actions) {
  if (n_states <= 0 || n_actions <= 0) throw InvalidInput("empty state or action space");
  TabularTables t;
  t.n_states = n_states;
  t.n_actions = n_actions;
  t.transition = Matrix::Zero(n_states * n_actions, n_states);
  t.reward = Matrix::Zero(n_states, n_actions);
  return t;
}

void TabularTables::validate(double tol) const {
  if (n_states <= 0 || n_actions <= 0) throw InvalidInput("empty state or action space");
  if (transition.rows() != n_states * n_actions || transition.cols() != n_states)
    throw InvalidInput("transition table has wrong shape");
  if (reward.rows() != n_states || reward.cols() != n_actions)
    throw InvalidInput("reward table has wrong shape");
  if (!transition.allFinite() || !reward.allFinite())
    throw InvalidInput("non-finite entry in tables");
  if ((transition.array() < 0.0).any()) throw InvalidInput("negative transition probability");
  for (int i = 0; i < transition.rows(); ++i) {
    if (std::abs(transition.row(i).sum() - 1.0) > tol)
      throw InvalidInput("transition row " + std::to_string(i) + " does not sum to one");
  }
}

void StochasticPolicy::validate(double tol) const {
  if (probs.rows() == 0 || probs.cols() == 0) throw InvalidInput("empty policy");
  if (!probs.allFinite() || (probs.array() < 0.0).any())
    throw InvalidInput("policy has invalid entries");
  for (int s = 0; s < probs.rows(); ++s)
    if (std::abs(probs.row(s).sum() - 1.0) > tol)
      throw InvalidInput("policy row does not sum to one");
}

Matrix state_transition(const TabularTables& tables, const StochasticPolicy& policy) {
  require_shapes(tables, policy);
  const int S = tables.n_states, A = tables.n_actions;
  Matrix p = Matrix::Zero(S, S);
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a) p.row(s) += policy.probs(s, a) * tables.transition.row(s * A + a);
  return p;
}

Vector policy_reward(const TabularTables& tables, const StochasticPolicy& policy) {
  require_shapes(tables, policy);
  return (tables.reward.array() * policy.probs.array()).rowwise().sum();
}

Vector solve_value(const TabularTables& tables, const StochasticPolicy& policy, double gamma) {
  require_gamma(gamma);
  return solve_linear_value(tables, policy, policy_reward(tables, policy), gamma);
}

QAdvantage q_and_advantage(const TabularTables& tables, const Vector& value,
                           const StochasticPolicy& policy, double gamma) {
  require_shapes(tables, policy);
  const int S = tables.n_states, A = tables.n_actions;
  Vector next = tables.transition * value;
  QAdvantage out;
  out.q.resize(S, A);
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a) out.q(s, a) = tables.reward(s, a) + gamma * next(s * A + a);
  out.advantage = out.q.colwise() - value;
  return out;
}

OccupancyMeasure occupancy(const TabularTables& tables, const StochasticPolicy& policy,
                           double gamma, const Vector& rho) {
  require_gamma(gamma);
  require_shapes(tables, policy);
  if (rho.size() != tables.n_states) throw InvalidInput("rho has wrong size");
  if ((rho.array() < 0.0).any() || std::abs(rho.sum() - 1.0) > 1e-12)
    throw InvalidInput("rho is not a distribution");
  const int S = tables.n_states;
  OccupancyMeasure out;
  if (gamma == 0.0) {
    out.states = rho;
  } else {
    Matrix system = Matrix::Identity(S, S) - gamma * state_transition(tables, policy).transpose();
    Eigen::PartialPivLU<Matrix> lu(system);
    Vector rhs = (1.0 - gamma) * rho;
    out.states = lu.solve(rhs);
    out.states += lu.solve(Vector(rhs - system * out.states));
  }
  out.d = policy.probs.array().colwise() * out.states.array();
  return out;
}

TabularTables soft_tables(const TabularTables& tables, const StochasticPolicy& policy,
                          double lambda) {
  require_shapes(tables, policy);
  if (lambda < 0.0) throw InvalidInput("lambda must be non-negative");
  if ((policy.probs.array() < kZeroProb).any())
    throw InvalidInput("zero policy probability in soft_tables");
  TabularTables out = tables;
  if (lambda > 0.0) out.reward.array() -= lambda * policy.probs.array().log();
  return out;
}

Vector solve_soft_value(const TabularTables& tables, const StochasticPolicy& policy,
                        double gamma, double lambda) {
  if (lambda == 0.0) return solve_value(tables, policy, gamma);
  return solve_value(soft_tables(tables, policy, lambda), policy, gamma);
}

double coverage_ratio(const OccupancyMeasure& num, const OccupancyMeasure& den) {
  if (num.d.rows() != den.d.rows() || num.d.cols() != den.d.cols())
    throw InvalidInput("occupancy shapes differ");
  double ratio = 0.0;
  for (int i = 0; i < num.d.size(); ++i) {
    double n = num.d(i), d = den.d(i);
    if (n <= 0.0) continue;
    if (d <= 0.0) return std::numeric_limits<double>::infinity();
    ratio = std::max(ratio, n / d);
  }
  return ratio;
}

double value_at(const Vector& value, const Vector& rho) { return value.dot(rho); }

Vector uniform_distribution(int n) { return Vector::Constant(n, 1.0 / n); }

namespace {

StochasticPolicy improve(const Matrix& q, double lambda) {
  const int S = static_cast<int>(q.rows()), A = static_cast<int>(q.cols());
  StochasticPolicy pi;
  pi.probs = Matrix::Zero(S, A);
  for (int s = 0; s < S; ++s) {
    if (lambda > 0.0) {
      Eigen::RowVectorXd z = (q.row(s).array() - q.row(s).maxCoeff()) / lambda;
      Eigen::RowVectorXd e = z.array().exp();
      pi.probs.row(s) = e / e.sum();
    } else {
      double best = q.row(s).maxCoeff();
      double tie = 1e-12 * std::max(1.0, std::abs(best));
      int count = 0;
      for (int a = 0; a < A; ++a)
        if (q(s, a) >= best - tie) ++count;
      for (int a = 0; a < A; ++a)
        if (q(s, a) >= best - tie) pi.probs(s, a) = 1.0 / count;
    }
  }
  return pi;
}

}  // namespace

SoftOptimum solve_soft_optimal(const TabularTables& tables, double gamma, double lambda,
                               double tol, int max_iter) {
  require_gamma(gamma);
  tables.validate(1e-9);
  const int S = tables.n_states, A = tables.n_actions;
  SoftOptimum out;
  out.policy.probs = Matrix::Constant(S, A, 1.0 / A);
  out.value = solve_soft_value(tables, out.policy, gamma, lambda);
  // policy iteration with exact evaluation
  for (int it = 1; it <= max_iter; ++it) {
    out.q = q_and_advantage(tables, out.value, out.policy, gamma).q;
    StochasticPolicy next = improve(out.q, lambda);
    Vector v = solve_soft_value(tables, next, gamma, lambda);
    double change = (v - out.value).lpNorm<Eigen::Infinity>();
    out.policy = std::move(next);
    out.value = std::move(v);
    out.iterations = it;
    if (change <= tol) {
      out.converged = true;
      break;
    }
  }
  out.q = q_and_advantage(tables, out.value, out.policy, gamma).q;
  return out;
}

double soft_improvement_gap(const TabularTables& tables, const StochasticPolicy& policy,
                            double gamma, double lambda) {
  Vector v = solve_soft_value(tables, policy, gamma, lambda);
  Matrix q = q_and_advantage(tables, v, policy, gamma).q;
  double gap = 0.0;
  for (int s = 0; s < tables.n_states; ++s) {
    double best = lambda > 0.0 ? lambda * log_sum_exp(q.row(s) / lambda) : q.row(s).maxCoeff();
    gap = std::max(gap, best - v(s));
  }
  return gap;
}

}  // namespace pepg
