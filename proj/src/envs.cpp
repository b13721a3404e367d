#include "pepg/envs.hpp"

#include <algorithm>
#include <cmath>

namespace pepg {

EnvGradients EnvGradients::zeros(int n_states, int n_actions) {
  EnvGradients g;
  g.n_states = n_states;
  g.n_actions = n_actions;
  g.dlog_p = Matrix::Zero(n_states * n_actions * n_states, n_states * n_actions);
  g.dr = Matrix::Zero(n_states * n_actions, n_states * n_actions);
  return g;
}

EnvGradients PerformativeEnv::analytic_gradients(const PolicyParams&) const {
  throw InvalidInput("environment '" + name() + "' has no analytic gradients");
}

TabularTables PerformativeEnv::prior_tables() const {
  TabularTables t = TabularTables::zeros(n_states(), n_actions());
  t.transition.setConstant(1.0 / n_states());
  return t;
}

namespace {

Vector resolve_psi(const ExpFamilyConfig& c) {
  if (c.psi.empty()) {
    double pm = ExpFamilyConfig::default_psi_max(c.gamma);
    Vector psi(c.n_states);
    for (int i = 0; i < c.n_states; ++i) psi(i) = pm * (i + 1) / c.n_states;
    return psi;
  }
  if (static_cast<int>(c.psi.size()) != c.n_states) throw InvalidInput("psi has wrong length");
  for (double v : c.psi)
    if (!(v >= 0.0) || !std::isfinite(v)) throw InvalidInput("psi must be finite and non-negative");
  return Eigen::Map<const Vector>(c.psi.data(), c.n_states);
}

Vector resolve_rho(int n, const std::vector<double>& rho) {
  if (rho.empty()) return uniform_distribution(n);
  if (static_cast<int>(rho.size()) != n) throw InvalidInput("rho has wrong length");
  Vector r = Eigen::Map<const Vector>(rho.data(), n);
  if ((r.array() < 0.0).any() || std::abs(r.sum() - 1.0) > 1e-12)
    throw InvalidInput("rho is not a distribution");
  return r;
}

void check_config(const ExpFamilyConfig& c) {
  if (c.n_states <= 0 || c.n_actions <= 0) throw InvalidInput("empty state or action space");
  if (!(c.gamma > 0.0 && c.gamma < 1.0)) throw InvalidInput("gamma must lie in (0, 1)");
  if (!(c.r_max > 0.0)) throw InvalidInput("r_max must be positive");
}

Matrix destination_probs(const Vector& psi, const PolicyParams& params) {
  // column a: distribution over next states for action a
  const Matrix& th = params.theta;
  Matrix p(th.rows(), th.cols());
  for (int a = 0; a < th.cols(); ++a) {
    Vector logits = th.col(a).array() * psi.array();
    Vector e = (logits.array() - logits.maxCoeff()).exp();
    p.col(a) = e / e.sum();
  }
  return p;
}

void check_params(const ExpFamilyConfig& c, const PolicyParams& params) {
  if (params.n_states() != c.n_states || params.n_actions() != c.n_actions)
    throw InvalidInput("parameter shape does not match environment");
  if (!params.theta.allFinite()) throw InvalidInput("non-finite policy parameters");
}

}  // namespace

double ExpFamilyConfig::psi_max() const { return resolve_psi(*this).maxCoeff(); }

TabularTables expfam_induce(const ExpFamilyConfig& c, const PolicyParams& params) {
  check_config(c);
  check_params(c, params);
  const int S = c.n_states, A = c.n_actions;
  Matrix dest = destination_probs(resolve_psi(c), params);
  TabularTables t = TabularTables::zeros(S, A);
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a) {
      t.transition.row(t.row(s, a)) = dest.col(a).transpose();
      t.reward(s, a) = std::clamp(c.xi * params.theta(s, a), -c.r_max, c.r_max);
    }
  return t;
}

EnvGradients expfam_analytic_grad(const ExpFamilyConfig& c, const PolicyParams& params) {
  check_config(c);
  check_params(c, params);
  const int S = c.n_states, A = c.n_actions;
  Vector psi = resolve_psi(c);
  Matrix dest = destination_probs(psi, params);
  EnvGradients g = EnvGradients::zeros(S, A);
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a) {
      for (int next = 0; next < S; ++next) {
        int row = g.p_row(s, a, next);
        for (int x = 0; x < S; ++x)
          g.dlog_p(row, param_index(S, x, a)) = psi(x) * ((x == next ? 1.0 : 0.0) - dest(x, a));
      }
      if (std::abs(c.xi * params.theta(s, a)) < c.r_max)
        g.dr(s * A + a, param_index(S, s, a)) = c.xi;
    }
  return g;
}

ExpFamilyEnv::ExpFamilyEnv(ExpFamilyConfig config) : cfg_(std::move(config)) {
  check_config(cfg_);
  psi_ = resolve_psi(cfg_);
  rho_ = resolve_rho(cfg_.n_states, cfg_.rho);
}

TabularTables ExpFamilyEnv::induce(const PolicyParams& params) const {
  return expfam_induce(cfg_, params);
}

EnvGradients ExpFamilyEnv::analytic_gradients(const PolicyParams& params) const {
  return expfam_analytic_grad(cfg_, params);
}

StaticEnv::StaticEnv(TabularTables tables, double gamma, Vector rho, double r_max)
    : tables_(std::move(tables)), gamma_(gamma), rho_(std::move(rho)), r_max_(r_max) {
  tables_.validate();
  if (rho_.size() != tables_.n_states) throw InvalidInput("rho has wrong length");
}

FunctionEnv::FunctionEnv(int n_states, int n_actions, double gamma, Vector rho, double r_max,
                         Map map)
    : S_(n_states), A_(n_actions), gamma_(gamma), rho_(std::move(rho)), r_max_(r_max),
      map_(std::move(map)) {}

}  // namespace pepg
