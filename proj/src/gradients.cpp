#include "pepg/gradients.hpp"

#include <cmath>

namespace pepg {

int truncation_horizon(double gamma, double r_max, double eps_tail) {
  if (!(gamma > 0.0 && gamma < 1.0)) return 1;
  double t = std::log(eps_tail * (1.0 - gamma) / r_max) / std::log(gamma);
  return std::max(1, static_cast<int>(std::ceil(t)));
}

std::vector<Trajectory> collect_trajectories(const TabularTables& tables,
                                             const StochasticPolicy& policy, const Vector& rho,
                                             int count, int horizon, std::uint64_t seed) {
  if (count <= 0 || horizon <= 0) throw InvalidInput("trajectory count and horizon must be positive");
  const int S = tables.n_states;
  // row-major copy so each transition row is contiguous
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> trans = tables.transition;
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> probs = policy.probs;
  Rng base(seed);
  std::vector<Trajectory> out(count);
  for (int i = 0; i < count; ++i) {
    Rng rng = base.split(static_cast<std::uint64_t>(i));
    Trajectory& traj = out[i];
    traj.reserve(horizon);
    int s = rng.categorical(rho.data(), S);
    for (int t = 0; t < horizon; ++t) {
      int a = rng.categorical(probs.row(s).data(), tables.n_actions);
      int next = rng.categorical(trans.row(tables.row(s, a)).data(), S);
      traj.push_back({s, a, next, tables.reward(s, a)});
      s = next;
    }
  }
  return out;
}

std::vector<Trajectory> soften(std::vector<Trajectory> trajs, const StochasticPolicy& policy,
                               double lambda) {
  if (lambda == 0.0) return trajs;
  for (auto& traj : trajs)
    for (auto& st : traj) st.r -= lambda * std::log(policy.probs(st.s, st.a));
  return trajs;
}

std::vector<double> reward_to_go(const Trajectory& traj, double gamma) {
  std::vector<double> out(traj.size());
  double acc = 0.0;
  for (int t = static_cast<int>(traj.size()) - 1; t >= 0; --t) {
    acc = traj[t].r + gamma * acc;
    out[t] = acc;
  }
  return out;
}

double discounted_return(const Trajectory& traj, double gamma) {
  double acc = 0.0, w = 1.0;
  for (const auto& st : traj) {
    acc += w * st.r;
    w *= gamma;
  }
  return acc;
}

Vector fit_value(const std::vector<Trajectory>& trajs, const Vector& previous, double gamma) {
  Vector sum = Vector::Zero(previous.size());
  Eigen::VectorXi visits = Eigen::VectorXi::Zero(previous.size());
  for (const auto& traj : trajs) {
    auto rtg = reward_to_go(traj, gamma);
    for (size_t t = 0; t < traj.size(); ++t) {
      sum(traj[t].s) += rtg[t];
      visits(traj[t].s) += 1;
    }
  }
  Vector out = previous;
  for (int s = 0; s < out.size(); ++s)
    if (visits(s) > 0) out(s) = sum(s) / visits(s);
  return out;
}

GradientEstimate pepg_gradient(const StochasticPolicy& policy,
                               const std::vector<Trajectory>& trajs, const Vector& value_baseline,
                               const EnvGradients* env_grads, double gamma,
                               const EstimatorOptions& options) {
  if (trajs.empty()) throw InvalidInput("no trajectories");
  const int S = policy.n_states(), A = policy.n_actions(), dim = S * A;
  if (value_baseline.size() != S) throw InvalidInput("value baseline has wrong size");
  if (env_grads && (env_grads->n_states != S || env_grads->n_actions != A))
    throw InvalidInput("environment gradients do not match policy shape");
  Vector pol_sum = Vector::Zero(dim), trans_sum = Vector::Zero(dim), rew_sum = Vector::Zero(dim);
  Vector total_sq = Vector::Zero(dim);
  Vector pol(dim), trans(dim), rew(dim);
  for (const auto& traj : trajs) {
    pol.setZero();
    trans.setZero();
    rew.setZero();
    auto rtg = reward_to_go(traj, gamma);
    double w = 1.0;
    for (size_t t = 0; t < traj.size(); ++t) {
      const Step& st = traj[t];
      double adv = rtg[t] - value_baseline(st.s) + options.advantage_bias;
      for (int b = 0; b < A; ++b) {
        double score = (b == st.a ? 1.0 : 0.0) - policy.probs(st.s, b);
        int j = param_index(S, st.s, b);
        pol(j) += w * adv * score;
        rew(j) -= w * options.lambda * score;
      }
      if (env_grads) {
        trans += (w * adv) * env_grads->dlog_p.row(env_grads->p_row(st.s, st.a, st.next)).transpose();
        rew += w * env_grads->dr.row(st.s * A + st.a).transpose();
      }
      if (options.discount_weights) w *= gamma;
    }
    pol_sum += pol;
    trans_sum += trans;
    rew_sum += rew;
    Vector total = pol + trans + rew;
    total_sq += total.cwiseProduct(total);
  }
  const double n = static_cast<double>(trajs.size());
  Vector mean = (pol_sum + trans_sum + rew_sum) / n;
  Vector var = (total_sq / n - mean.cwiseProduct(mean)).cwiseMax(0.0);
  if (n > 1) var *= n / (n - 1.0);
  GradientEstimate est;
  est.grad = Eigen::Map<const Matrix>(mean.data(), S, A);
  Vector se = (var / n).cwiseSqrt();
  est.std_error = Eigen::Map<const Matrix>(se.data(), S, A);
  est.policy_term_norm = (pol_sum / n).norm();
  est.transition_term_norm = (trans_sum / n).norm();
  est.reward_term_norm = (rew_sum / n).norm();
  if (!est.grad.allFinite()) throw std::runtime_error("non-finite gradient estimate");
  return est;
}

double exact_value(const PerformativeEnv& env, const PolicyParams& params, double lambda) {
  TabularTables tables = env.induce(params);
  StochasticPolicy pi = softmax(params);
  return value_at(solve_soft_value(tables, pi, env.gamma(), lambda), env.rho());
}

Matrix exact_gradient_fd(const PerformativeEnv& env, const PolicyParams& params, double lambda,
                         double h) {
  Matrix grad(params.n_states(), params.n_actions());
  PolicyParams probe = params;
  for (int j = 0; j < params.dim(); ++j) {
    double orig = probe.theta.data()[j];
    probe.theta.data()[j] = orig + h;
    double up = exact_value(env, probe, lambda);
    probe.theta.data()[j] = orig - h;
    double down = exact_value(env, probe, lambda);
    probe.theta.data()[j] = orig;
    grad.data()[j] = (up - down) / (2.0 * h);
  }
  return grad;
}

Matrix exact_gradient_occupancy(const PerformativeEnv& env, const PolicyParams& params,
                                const EnvGradients& env_grads, double lambda) {
  const int S = params.n_states(), A = params.n_actions(), dim = S * A;
  const double gamma = env.gamma();
  TabularTables tables = env.induce(params);
  StochasticPolicy pi = softmax(params);
  TabularTables reg = lambda > 0.0 ? soft_tables(tables, pi, lambda) : tables;
  Vector v = solve_value(reg, pi, gamma);
  QAdvantage qa = q_and_advantage(reg, v, pi, gamma);
  OccupancyMeasure occ = occupancy(tables, pi, gamma, env.rho());
  Vector g = Vector::Zero(dim);
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a) {
      double d = occ.d(s, a);
      if (d == 0.0) continue;
      for (int b = 0; b < A; ++b) {
        double score = (b == a ? 1.0 : 0.0) - pi.probs(s, b);
        g(param_index(S, s, b)) += d * (qa.advantage(s, a) - lambda) * score;
      }
      // E[(r + gamma V(s') - V(s)) dlogP] = gamma E[V(s') dlogP] since E[dlogP] = 0
      for (int next = 0; next < S; ++next) {
        double p = tables.p(s, a, next);
        if (p == 0.0) continue;
        g += (d * gamma * p * v(next)) * env_grads.dlog_p.row(env_grads.p_row(s, a, next)).transpose();
      }
      g += d * env_grads.dr.row(s * A + a).transpose();
    }
  g /= (1.0 - gamma);
  return Eigen::Map<const Matrix>(g.data(), S, A);
}

GradProvider parse_grad_provider(const std::string& name) {
  if (name == "analytic") return GradProvider::Analytic;
  if (name == "fd" || name == "finite-difference") return GradProvider::FiniteDifference;
  if (name == "directional") return GradProvider::Directional;
  if (name == "zero") return GradProvider::Zero;
  throw InvalidInput("unknown gradient provider: " + name);
}

std::string to_string(GradProvider p) {
  switch (p) {
    case GradProvider::Analytic: return "analytic";
    case GradProvider::FiniteDifference: return "fd";
    case GradProvider::Directional: return "directional";
    case GradProvider::Zero: return "zero";
  }
  return "?";
}

namespace {

// Flattened (log P, r) at params; entries with P == 0 are marked by -inf.
struct TableSnapshot {
  Vector log_p;
  Vector r;
};

TableSnapshot snapshot(const PerformativeEnv& env, const PolicyParams& params) {
  TabularTables t = env.induce(params);
  const int S = t.n_states, A = t.n_actions;
  TableSnapshot snap;
  snap.log_p.resize(S * A * S);
  snap.r.resize(S * A);
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a) {
      snap.r(s * A + a) = t.reward(s, a);
      for (int next = 0; next < S; ++next) {
        double p = t.p(s, a, next);
        snap.log_p((s * A + a) * S + next) = p > 0.0 ? std::log(p) : -INFINITY;
      }
    }
  return snap;
}

// Central difference of two snapshots; zero-probability entries give 0.
void difference(const TableSnapshot& up, const TableSnapshot& down, double scale,
                Eigen::Ref<Vector> dlog_p, Eigen::Ref<Vector> dr, int* zero_entries) {
  int zeros = 0;
  for (int i = 0; i < up.log_p.size(); ++i) {
    if (std::isinf(up.log_p(i)) || std::isinf(down.log_p(i))) {
      dlog_p(i) = 0.0;
      ++zeros;
    } else {
      dlog_p(i) = (up.log_p(i) - down.log_p(i)) * scale;
    }
  }
  dr = (up.r - down.r) * scale;
  if (zero_entries) *zero_entries = std::max(*zero_entries, zeros);
}

}  // namespace

EnvGradients env_grad_fd(const PerformativeEnv& env, const PolicyParams& params, double h) {
  EnvGradients g = EnvGradients::zeros(env.n_states(), env.n_actions());
  PolicyParams probe = params;
  Vector col_p(g.dlog_p.rows()), col_r(g.dr.rows());
  for (int j = 0; j < params.dim(); ++j) {
    double orig = probe.theta.data()[j];
    probe.theta.data()[j] = orig + h;
    TableSnapshot up = snapshot(env, probe);
    probe.theta.data()[j] = orig - h;
    TableSnapshot down = snapshot(env, probe);
    probe.theta.data()[j] = orig;
    difference(up, down, 1.0 / (2.0 * h), col_p, col_r, &g.zero_prob_entries);
    g.dlog_p.col(j) = col_p;
    g.dr.col(j) = col_r;
  }
  return g;
}

EnvGradients env_grad_directional(const PerformativeEnv& env, const PolicyParams& params,
                                  int directions, std::uint64_t seed, double h) {
  if (directions <= 0) throw InvalidInput("directions must be positive");
  const int dim = params.dim();
  EnvGradients g = EnvGradients::zeros(env.n_states(), env.n_actions());
  Rng rng(seed);
  Matrix dirs(dim, directions);
  for (int i = 0; i < directions; ++i) {
    for (int j = 0; j < dim; ++j) dirs(j, i) = rng.normal();
    dirs.col(i).normalize();
  }
  Matrix dp(g.dlog_p.rows(), directions), dr(g.dr.rows(), directions);
  for (int i = 0; i < directions; ++i) {
    PolicyParams up = params, down = params;
    up.theta.reshaped() += h * dirs.col(i);
    down.theta.reshaped() -= h * dirs.col(i);
    difference(snapshot(env, up), snapshot(env, down), 1.0 / (2.0 * h), dp.col(i), dr.col(i),
               &g.zero_prob_entries);
  }
  // least squares (minimum norm when directions < dim): G dirs = D
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(dirs.transpose());
  g.dlog_p = cod.solve(dp.transpose()).transpose();
  g.dr = cod.solve(dr.transpose()).transpose();
  return g;
}

EnvGradients env_gradients(const PerformativeEnv& env, const PolicyParams& params,
                           const ProviderOptions& options) {
  switch (options.kind) {
    case GradProvider::Analytic: return env.analytic_gradients(params);
    case GradProvider::FiniteDifference: return env_grad_fd(env, params, options.h);
    case GradProvider::Directional:
      return env_grad_directional(env, params, options.directions, options.seed, options.h);
    case GradProvider::Zero: return EnvGradients::zeros(env.n_states(), env.n_actions());
  }
  throw InvalidInput("unknown gradient provider");
}

}  // namespace pepg
