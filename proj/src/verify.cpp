#include "pepg/verify.hpp"

#include <cmath>
#include <sstream>

namespace pepg {

LemmaReport equality_report(std::string lemma, std::string instance, double lhs, double rhs,
                            double tol) {
  LemmaReport r;
  r.lemma = std::move(lemma);
  r.instance = std::move(instance);
  r.equality = true;
  r.lhs = lhs;
  r.rhs = rhs;
  r.residual = std::abs(lhs - rhs);
  r.tolerance = tol;
  r.pass = std::isfinite(r.residual) && r.residual <= tol;
  return r;
}

LemmaReport inequality_report(std::string lemma, std::string instance, double lhs, double rhs,
                              double tol) {
  LemmaReport r;
  r.lemma = std::move(lemma);
  r.instance = std::move(instance);
  r.equality = false;
  r.lhs = lhs;
  r.rhs = rhs;
  r.residual = rhs - lhs;
  r.tolerance = tol;
  r.pass = std::isfinite(r.residual) && r.residual >= -tol;
  return r;
}

VerifyInstance random_instance(std::uint64_t seed) {
  Rng rng(mix_seed(seed, 0x5eed));
  VerifyInstance inst;
  ExpFamilyConfig& c = inst.config;
  c.n_states = 2 + rng.uniform_int(3);
  c.n_actions = 2 + rng.uniform_int(2);
  c.gamma = rng.uniform() < 0.5 ? 0.5 : 0.9;
  c.r_max = 1.0;
  c.xi = c.r_max * (0.1 + 0.9 * rng.uniform());
  double pm = ExpFamilyConfig::default_psi_max(c.gamma);
  c.psi.resize(c.n_states);
  for (auto& v : c.psi) v = pm * rng.uniform();
  inst.theta = PolicyParams::zeros(c.n_states, c.n_actions);
  inst.theta_prime = PolicyParams::zeros(c.n_states, c.n_actions);
  for (int i = 0; i < inst.theta.dim(); ++i) {
    inst.theta.theta.data()[i] = 1.5 * rng.normal();
    inst.theta_prime.theta.data()[i] = 1.5 * rng.normal();
  }
  std::ostringstream os;
  os << "expfam seed=" << seed << " S=" << c.n_states << " A=" << c.n_actions
     << " gamma=" << c.gamma << " xi=" << c.xi;
  inst.label = os.str();
  return inst;
}

namespace {

struct Deployment {
  TabularTables tables;
  StochasticPolicy policy;
};

Deployment deploy(const PerformativeEnv& env, const PolicyParams& p) {
  return {env.induce(p), softmax(p)};
}

// E_d[f] with f(s,a) = shift in reward and transition against a value vector.
double shift_term(const OccupancyMeasure& occ, const TabularTables& a, const TabularTables& b,
                  const Vector& value, double gamma) {
  const int S = a.n_states, A = a.n_actions;
  double acc = 0.0;
  for (int s = 0; s < S; ++s)
    for (int act = 0; act < A; ++act) {
      int row = a.row(s, act);
      double f = a.reward(s, act) - b.reward(s, act) +
                 gamma * (a.transition.row(row) - b.transition.row(row)).dot(value);
      acc += occ.d(s, act) * f;
    }
  return acc;
}

double weighted(const OccupancyMeasure& occ, const Matrix& table) {
  return (occ.d.array() * table.array()).sum();
}

double log_actions(const PerformativeEnv& env) { return std::log(double(env.n_actions())); }

}  // namespace

std::vector<LemmaReport> check_performance_difference(const PerformativeEnv& env,
                                                      const PolicyParams& theta,
                                                      const PolicyParams& theta_prime,
                                                      double tol, double advantage_bias) {
  const double g = env.gamma(), k = 1.0 / (1.0 - g);
  const Vector& rho = env.rho();
  Deployment m = deploy(env, theta), mp = deploy(env, theta_prime);
  // value of policy x in environment y
  Vector v_pp = solve_value(m.tables, m.policy, g);      // pi in M_pi
  Vector v_qq = solve_value(mp.tables, mp.policy, g);    // pi' in M_pi'
  Vector v_pq = solve_value(mp.tables, m.policy, g);     // pi in M_pi'
  Vector v_qp = solve_value(m.tables, mp.policy, g);     // pi' in M_pi
  double lhs = value_at(v_pp, rho) - value_at(v_qq, rho);

  Matrix adv_qq = q_and_advantage(mp.tables, v_qq, mp.policy, g).advantage;
  Matrix adv_qp = q_and_advantage(m.tables, v_qp, mp.policy, g).advantage;
  adv_qq.array() += advantage_bias;
  adv_qp.array() += advantage_bias;

  OccupancyMeasure d_pq = occupancy(mp.tables, m.policy, g, rho);
  OccupancyMeasure d_pp = occupancy(m.tables, m.policy, g, rho);
  OccupancyMeasure d_qq = occupancy(mp.tables, mp.policy, g, rho);

  double form1 = k * weighted(d_pq, adv_qq) + k * shift_term(d_pq, m.tables, mp.tables, v_pp, g);
  double form2 = k * weighted(d_pq, adv_qq) + k * shift_term(d_pp, m.tables, mp.tables, v_pq, g);
  double form3 = k * weighted(d_pp, adv_qp) + k * shift_term(d_qq, m.tables, mp.tables, v_qp, g);

  std::string label = env.name();
  return {equality_report("lemma1.form1", label, lhs, form1, tol),
          equality_report("lemma1.form2", label, lhs, form2, tol),
          equality_report("lemma1.form3", label, lhs, form3, tol)};
}

LemmaReport check_gradient_theorem(const PerformativeEnv& env, const PolicyParams& theta,
                                   double lambda, double tol) {
  Matrix exact = exact_gradient_occupancy(env, theta, env.analytic_gradients(theta), lambda);
  Matrix fd = exact_gradient_fd(env, theta, lambda, 1e-5);
  double worst = 0.0;
  int worst_j = 0;
  for (int j = 0; j < fd.size(); ++j) {
    double rel = std::abs(exact(j) - fd(j)) / std::max(std::abs(fd(j)), 1e-3);
    if (rel > worst) {
      worst = rel;
      worst_j = j;
    }
  }
  LemmaReport r = inequality_report(lambda > 0.0 ? "theorem2.soft" : "theorem2", env.name(),
                                    worst, tol, 0.0);
  r.equality = true;
  r.residual = worst;
  r.pass = std::isfinite(worst) && worst <= tol;
  std::ostringstream os;
  os << "max relative coordinate error at index " << worst_j << "; lambda=" << lambda;
  r.note = os.str();
  return r;
}

namespace {

Matrix exact_gradient(const PerformativeEnv& env, const PolicyParams& p, double lambda) {
  if (env.has_analytic_gradients())
    return exact_gradient_occupancy(env, p, env.analytic_gradients(p), lambda);
  return exact_gradient_fd(env, p, lambda);
}

}  // namespace

OptimalPolicyOracle find_optimal_policy(const PerformativeEnv& env, double lambda, int restarts,
                                        int budget, std::uint64_t seed) {
  const int S = env.n_states(), A = env.n_actions();
  std::vector<PolicyParams> seeds;
  Rng rng(seed);
  for (int i = 0; i < restarts; ++i) {
    PolicyParams p = PolicyParams::zeros(S, A);
    for (int j = 0; j < p.dim(); ++j) p.theta.data()[j] = 2.0 * rng.normal();
    seeds.push_back(p);
  }
  const double corner = 5.0;
  if (S * A <= 12) {
    int total = 1;
    for (int s = 0; s < S; ++s) total *= A;
    for (int code = 0; code < total; ++code) {
      PolicyParams p{Matrix::Constant(S, A, -corner)};
      for (int s = 0, c = code; s < S; ++s, c /= A) p.theta(s, c % A) = corner;
      seeds.push_back(p);
    }
  }
  seeds.push_back(PolicyParams{Matrix::Constant(S, A, corner)});

  OptimalPolicyOracle best;
  best.value = -INFINITY;
  const int cost_per_step = env.has_analytic_gradients() ? 1 : 2 * S * A;
  for (const auto& start : seeds) {
    PolicyParams p = start;
    double v = exact_value(env, p, lambda);
    best.evaluations += 1;
    double step = 1.0;
    for (int it = 0; it < 300; ++it) {
      if (best.evaluations >= budget) {
        best.budget_exhausted = true;
        break;
      }
      Matrix g = exact_gradient(env, p, lambda);
      best.evaluations += cost_per_step;
      if (g.norm() < 1e-12) break;
      step = std::min(step * 2.0, 1e3);
      bool moved = false;
      while (step > 1e-10) {
        PolicyParams q{p.theta + step * g};
        double vq = -INFINITY;
        try {
          vq = exact_value(env, q, lambda);
        } catch (const InvalidInput&) {
          // probabilities underflowed; the soft value is undefined there, shrink the step
        }
        best.evaluations += 1;
        if (vq > v) {
          p = q;
          v = vq;
          moved = true;
          break;
        }
        step *= 0.5;
      }
      if (!moved) break;
    }
    best.probe_values.push_back(v);
    ++best.restarts;
    if (v > best.value) {
      best.value = v;
      best.theta = p;
    }
    if (best.budget_exhausted) break;
  }
  return best;
}

LipschitzEstimate estimate_lipschitz(const PerformativeEnv& env,
                                     const std::vector<std::pair<PolicyParams, PolicyParams>>& pairs,
                                     int probes, std::uint64_t seed, double inflation) {
  LipschitzEstimate est;
  auto consider = [&](const PolicyParams& a, const PolicyParams& b) {
    Deployment x = deploy(env, a), y = deploy(env, b);
    double dpi = (x.policy.probs - y.policy.probs).cwiseAbs().maxCoeff();
    if (dpi <= 1e-12) return;
    est.reward = std::max(est.reward, (x.tables.reward - y.tables.reward).cwiseAbs().sum() / dpi);
    est.transition =
        std::max(est.transition, (x.tables.transition - y.tables.transition).cwiseAbs().sum() / dpi);
  };
  for (const auto& pr : pairs) consider(pr.first, pr.second);
  Rng rng(seed);
  for (int i = 0; i < probes && !pairs.empty(); ++i) {
    const auto& base = pairs[i % pairs.size()];
    double u1 = rng.uniform(), u2 = rng.uniform();
    PolicyParams a{base.first.theta + u1 * (base.second.theta - base.first.theta)};
    PolicyParams b{base.first.theta + u2 * (base.second.theta - base.first.theta)};
    for (int j = 0; j < a.dim(); ++j) {
      a.theta.data()[j] += 0.5 * rng.normal();
      b.theta.data()[j] += 0.5 * rng.normal();
    }
    consider(a, b);
  }
  est.reward *= inflation;
  est.transition *= inflation;
  return est;
}

double hellinger(const Eigen::RowVectorXd& p, const Eigen::RowVectorXd& q) {
  double bc = (p.array() * q.array()).sqrt().sum();
  return std::sqrt(std::max(0.0, 1.0 - bc));
}

LemmaReport check_shift_bound(const PerformativeEnv& env, const PolicyParams& theta,
                              const OptimalPolicyOracle& oracle, const LipschitzEstimate& lip,
                              double tol) {
  const double g = env.gamma(), k = 1.0 / (1.0 - g);
  const Vector& rho = env.rho();
  Deployment cur = deploy(env, theta), opt = deploy(env, oracle.theta);
  Vector v_cur = solve_value(cur.tables, cur.policy, g);
  Vector v_opt = solve_value(opt.tables, opt.policy, g);
  double subopt = value_at(v_opt, rho) - value_at(v_cur, rho);
  Matrix adv = q_and_advantage(cur.tables, v_cur, cur.policy, g).advantage;
  OccupancyMeasure d = occupancy(cur.tables, opt.policy, g, rho);  // pi* in M_theta
  double lhs = std::abs(subopt - k * weighted(d, adv));
  double h = 0.0;
  for (int s = 0; s < env.n_states(); ++s)
    h += rho(s) * hellinger(opt.policy.probs.row(s), cur.policy.probs.row(s));
  double rhs = 2.0 * std::sqrt(2.0) * k * (lip.reward + g * lip.transition * env.r_max() * k) * h;
  LemmaReport r = inequality_report("lemma2", env.name(), lhs, rhs, tol);
  std::ostringstream os;
  os << "L_r=" << lip.reward << " L_P=" << lip.transition << " oracle_restarts=" << oracle.restarts;
  r.note = os.str();
  return r;
}

namespace {

struct DominationParts {
  double subopt = 0.0;
  double coverage = 0.0;
  double grad_norm = 0.0;
};

DominationParts domination_parts(const PerformativeEnv& env, const PolicyParams& theta,
                                 const OptimalPolicyOracle& oracle, const Vector& nu,
                                 double lambda) {
  const double g = env.gamma();
  Deployment cur = deploy(env, theta), opt = deploy(env, oracle.theta);
  DominationParts parts;
  parts.subopt = value_at(solve_soft_value(opt.tables, opt.policy, g, lambda), env.rho()) -
                 value_at(solve_soft_value(cur.tables, cur.policy, g, lambda), env.rho());
  OccupancyMeasure num = occupancy(cur.tables, opt.policy, g, env.rho());
  OccupancyMeasure den = occupancy(cur.tables, cur.policy, g, nu);
  parts.coverage = coverage_ratio(num, den);
  RestartedEnv at_nu(env, nu);
  parts.grad_norm = exact_gradient(at_nu, theta, lambda).norm();
  return parts;
}

}  // namespace

LemmaReport check_gradient_domination(const PerformativeEnv& env, const PolicyParams& theta,
                                      const OptimalPolicyOracle& oracle, const Vector& nu,
                                      double lambda, double tol) {
  DominationParts p = domination_parts(env, theta, oracle, nu, lambda);
  double sa = std::sqrt(double(env.n_states() * env.n_actions()));
  double bias = (env.r_max() + lambda * log_actions(env)) / (1.0 - env.gamma());
  double rhs = sa * p.coverage * p.grad_norm + bias;
  LemmaReport r = inequality_report(lambda > 0.0 ? "lemma3.expfam.soft" : "lemma3.expfam",
                                    env.name(), p.subopt, rhs, tol);
  if (!std::isfinite(p.coverage)) {
    r.inconclusive = true;
    r.pass = false;
  }
  std::ostringstream os;
  os << "coverage=" << p.coverage << " grad_norm=" << p.grad_norm << " lambda=" << lambda;
  r.note = os.str();
  return r;
}

LemmaReport check_gradient_domination_generic(const PerformativeEnv& env,
                                              const PolicyParams& theta,
                                              const OptimalPolicyOracle& oracle,
                                              const Vector& nu, double lambda,
                                              const LipschitzEstimate& lip, double tol) {
  DominationParts p = domination_parts(env, theta, oracle, nu, lambda);
  const double g = env.gamma();
  double sa = std::sqrt(double(env.n_states() * env.n_actions()));
  double bias = lambda > 0.0
                    ? (2.0 + p.coverage) / ((1 - g) * (1 - g)) *
                          (lip.reward + lip.transition * (env.r_max() + lambda * log_actions(env)))
                    : (1.0 + p.coverage) / ((1 - g) * (1 - g)) *
                          (lip.reward + lip.transition * env.r_max());
  double rhs = sa * p.coverage * p.grad_norm + bias;
  LemmaReport r = inequality_report(lambda > 0.0 ? "lemma3.generic.soft" : "lemma3.generic",
                                    env.name(), p.subopt, rhs, tol);
  if (!std::isfinite(p.coverage)) {
    r.inconclusive = true;
    r.pass = false;
  }
  return r;
}

SmoothnessConstants expfam_smoothness(const ExpFamilyConfig& c) {
  const double g = c.gamma, om = 1.0 - g;
  const double C1 = 2.0, C2 = 6.0;
  const double T1 = c.psi_max(), T2 = T1 * T1;
  const double R1 = c.xi * c.n_actions, R2 = 0.0;
  const double logA = std::log(double(c.n_actions));
  SmoothnessConstants k;
  k.beta1 = g / (om * om) * (C1 + T1) + R1 / om;
  const double mixed = C2 + 2.0 * C1 * T1 + T2;
  k.beta2 = 2.0 * g * g / (om * om * om) * (C1 + T1) * (C1 + T1) + g / (om * om) * mixed +
            2.0 * g * R1 / (om * om) * mixed + R2 / om + g * C1 * R1 / (om * om);
  k.value = C2 / om + 2.0 * C1 * k.beta1 + C2 * k.beta2;
  k.entropy = 2.0 * g * g * 3.0 * (1.0 + logA) / om + g * 2.0 * logA / (om * om) * (C1 + T1) +
              2.0 * g * logA / (om * om) * mixed + logA / (om * om * om) * (C1 + T1) * (C1 + T1);
  return k;
}

double smoothness_probe(const PerformativeEnv& env, const PolicyParams& theta, int directions,
                        double h, double lambda, std::uint64_t seed) {
  if (directions < 1 || !(h > 0.0)) throw InvalidInput("smoothness probe needs m >= 1 and h > 0");
  Rng rng(seed);
  double center = exact_value(env, theta, lambda), worst = 0.0;
  for (int i = 0; i < directions; ++i) {
    Vector u(theta.dim());
    for (int j = 0; j < u.size(); ++j) u(j) = rng.normal();
    u.normalize();
    PolicyParams up = theta, down = theta;
    up.theta.reshaped() += h * u;
    down.theta.reshaped() -= h * u;
    double second = (exact_value(env, up, lambda) - 2.0 * center + exact_value(env, down, lambda)) / (h * h);
    worst = std::max(worst, std::abs(second));
  }
  return worst;
}

LemmaReport check_smoothness(const ExpFamilyEnv& env, const PolicyParams& theta, double lambda,
                             int directions, std::uint64_t seed, double tol) {
  SmoothnessConstants k = expfam_smoothness(env.config());
  double probe = smoothness_probe(env, theta, directions, 1e-3, lambda, seed);
  double bound = k.value + lambda * k.entropy;
  LemmaReport r = inequality_report(lambda > 0.0 ? "smoothness.soft" : "smoothness", env.name(),
                                    probe, bound, tol);
  std::ostringstream os;
  os << "L=" << k.value << " beta_lambda=" << k.entropy << " lambda=" << lambda;
  r.note = os.str();
  return r;
}

std::vector<LemmaReport> check_basic_invariants(const PerformativeEnv& env,
                                                const PolicyParams& theta,
                                                const PolicyParams& theta_prime, double lambda) {
  const double g = env.gamma();
  Deployment m = deploy(env, theta), mp = deploy(env, theta_prime);
  std::vector<LemmaReport> out;
  OccupancyMeasure d = occupancy(m.tables, m.policy, g, env.rho());
  out.push_back(equality_report("occupancy.normalized", env.name(), d.d.sum(), 1.0, 1e-10));
  Vector v = solve_value(m.tables, m.policy, g);
  Matrix adv = q_and_advantage(m.tables, v, m.policy, g).advantage;
  double zero_mean = (adv.array() * m.policy.probs.array()).rowwise().sum().abs().maxCoeff();
  out.push_back(equality_report("advantage.zero_mean", env.name(), zero_mean, 0.0, 1e-10));
  OccupancyMeasure d2 = occupancy(mp.tables, mp.policy, g, env.rho());
  out.push_back(inequality_report("coverage.at_least_one", env.name(), 1.0,
                                  coverage_ratio(d2, d), 1e-12));
  double max_entropy = 0.0;
  for (int s = 0; s < env.n_states(); ++s)
    max_entropy = std::max(max_entropy, policy_entropy(m.policy, s));
  out.push_back(inequality_report("entropy.bound", env.name(), max_entropy, log_actions(env), 1e-12));
  Vector sv = solve_soft_value(m.tables, m.policy, g, lambda);
  double upper = (env.r_max() + lambda * log_actions(env)) / (1.0 - g);
  double lower = -env.r_max() / (1.0 - g);
  double worst = std::max(sv.maxCoeff() - upper, lower - sv.minCoeff());
  LemmaReport r = inequality_report("soft_value.bound", env.name(), worst, 0.0, 1e-8);
  r.note = "lambda=" + std::to_string(lambda);
  out.push_back(r);
  return out;
}

LemmaReport check_monotone_ascent(const ExpFamilyEnv& env, const PolicyParams& theta0, int steps,
                                  double tol) {
  double eta = 1.0 / expfam_smoothness(env.config()).value;
  PolicyParams p = theta0;
  double v = exact_value(env, p), worst = INFINITY;
  for (int k = 0; k < steps; ++k) {
    p.theta += eta * exact_gradient(env, p, 0.0);
    double next = exact_value(env, p);
    worst = std::min(worst, next - v);
    v = next;
  }
  LemmaReport r = inequality_report("ascent.monotone", env.name(), -worst, 0.0, tol);
  r.note = "eta=1/L=" + std::to_string(eta) + " min step improvement=" + std::to_string(worst);
  return r;
}

ConsistencyResult estimator_consistency(const PerformativeEnv& env, const PolicyParams& theta,
                                        double lambda, int trajectories, std::uint64_t seed) {
  const double g = env.gamma();
  TabularTables tables = env.induce(theta);
  StochasticPolicy pi = softmax(theta);
  EnvGradients eg = env.analytic_gradients(theta);
  int horizon = std::max(1, int(std::ceil(std::log(1e-10) / std::log(g))));
  Rng rng(seed);
  // baseline from an independent batch
  auto fit_batch = soften(collect_trajectories(tables, pi, env.rho(), 5000, horizon, rng.split(0).seed()), pi, lambda);
  Vector baseline = fit_value(fit_batch, Vector::Zero(env.n_states()), g);
  const int S = env.n_states(), A = env.n_actions();
  const int chunk = 10000;
  Matrix sum = Matrix::Zero(S, A), sum_sq = Matrix::Zero(S, A);
  int done = 0, index = 1;
  while (done < trajectories) {
    int n = std::min(chunk, trajectories - done);
    auto trajs = soften(collect_trajectories(tables, pi, env.rho(), n, horizon, rng.split(index++).seed()), pi, lambda);
    EstimatorOptions opts;
    opts.lambda = lambda;
    GradientEstimate est = pepg_gradient(pi, trajs, baseline, &eg, g, opts);
    // recover per-chunk sums of x and x^2 from mean and standard error
    Matrix var = est.std_error.array().square() * n;
    sum += est.grad * n;
    sum_sq += (var * (n - 1) + (est.grad.array().square() * n).matrix());
    done += n;
  }
  ConsistencyResult res;
  res.estimate = sum / trajectories;
  Matrix var = (sum_sq / trajectories - res.estimate.cwiseProduct(res.estimate)) *
               (double(trajectories) / (trajectories - 1));
  Matrix se = (var / trajectories).cwiseSqrt();
  res.exact = exact_gradient_occupancy(env, theta, eg, lambda);
  res.z = (res.estimate - res.exact).cwiseQuotient(se.cwiseMax(1e-300));
  res.max_abs_z = res.z.cwiseAbs().maxCoeff();
  return res;
}

std::vector<LemmaReport> run_identity_suite(const SuiteOptions& options) {
  std::vector<LemmaReport> out;
  for (int i = 0; i < options.instances; ++i) {
    VerifyInstance inst = random_instance(options.seed + i);
    ExpFamilyEnv env(inst.config);
    auto tag = [&](LemmaReport r) {
      r.instance = inst.label;
      out.push_back(std::move(r));
    };
    for (auto& r : check_performance_difference(env, inst.theta, inst.theta_prime, 1e-8,
                                                options.advantage_bias))
      tag(r);
    tag(check_gradient_theorem(env, inst.theta, 0.0));
    tag(check_gradient_theorem(env, inst.theta, 2.0));
    for (auto& r : check_basic_invariants(env, inst.theta, inst.theta_prime, 0.0)) {
      if (r.lemma == "soft_value.bound" || r.lemma == "entropy.bound") continue;
      tag(r);
    }
  }
  return out;
}

std::vector<LemmaReport> run_inequality_suite(const SuiteOptions& options) {
  std::vector<LemmaReport> out;
  for (int i = 0; i < options.instances; ++i) {
    VerifyInstance inst = random_instance(options.seed + i);
    ExpFamilyEnv env(inst.config);
    auto tag = [&](LemmaReport r) {
      r.instance = inst.label;
      out.push_back(std::move(r));
    };
    const double log_a = std::log(double(env.n_actions()));
    const double lam = (1.0 - env.gamma()) * env.r_max() / (1.0 + 2.0 * log_a);
    const Vector nu = uniform_distribution(env.n_states());
    std::uint64_t s = mix_seed(options.seed, i);

    OptimalPolicyOracle hard = find_optimal_policy(env, 0.0, 8, 2000000, s);
    OptimalPolicyOracle soft = find_optimal_policy(env, lam, 8, 2000000, s + 1);
    LipschitzEstimate lip =
        estimate_lipschitz(env, {{hard.theta, inst.theta}, {inst.theta, inst.theta_prime}}, 200, s + 2);

    tag(check_shift_bound(env, inst.theta, hard, lip));
    tag(check_gradient_domination(env, inst.theta, hard, nu, 0.0));
    tag(check_gradient_domination(env, inst.theta, soft, nu, lam));
    tag(check_gradient_domination_generic(env, inst.theta, hard, nu, 0.0, lip));
    tag(check_gradient_domination_generic(env, inst.theta, soft, nu, lam, lip));
    tag(check_smoothness(env, inst.theta, 0.0, 100, s + 3));
    tag(check_smoothness(env, inst.theta, 2.0, 100, s + 4));
    for (auto& r : check_basic_invariants(env, inst.theta, inst.theta_prime, 2.0)) {
      if (r.lemma == "soft_value.bound" || r.lemma == "entropy.bound") tag(r);
    }
  }
  return out;
}

VerifyInstance consistency_instance() {
  VerifyInstance inst;
  ExpFamilyConfig& c = inst.config;
  c.n_states = 2;
  c.n_actions = 2;
  c.gamma = 0.9;
  c.r_max = 1.0;
  c.xi = 0.5;
  double pm = ExpFamilyConfig::default_psi_max(c.gamma);
  c.psi = {0.4 * pm, 0.9 * pm};
  inst.theta = PolicyParams::zeros(2, 2);
  inst.theta.theta << 0.5, -0.3, -0.8, 0.2;
  inst.theta_prime = inst.theta;
  inst.label = "expfam fixed S=2 A=2 gamma=0.9 xi=0.5";
  return inst;
}

std::vector<LemmaReport> run_consistency_suite(std::uint64_t seed, int trajectories) {
  VerifyInstance inst = consistency_instance();
  ExpFamilyEnv env(inst.config);
  std::vector<LemmaReport> out;
  for (double lambda : {0.0, 2.0}) {
    ConsistencyResult res = estimator_consistency(env, inst.theta, lambda, trajectories,
                                                  mix_seed(seed, lambda > 0 ? 2 : 1));
    for (int s = 0; s < res.z.rows(); ++s)
      for (int a = 0; a < res.z.cols(); ++a) {
        LemmaReport r = inequality_report(lambda > 0 ? "consistency.soft" : "consistency",
                                          inst.label, std::abs(res.z(s, a)), 3.0, 0.0);
        std::ostringstream os;
        os << "coord (" << s << "," << a << ") estimate=" << res.estimate(s, a)
           << " exact=" << res.exact(s, a);
        r.note = os.str();
        out.push_back(std::move(r));
      }
  }
  return out;
}

std::vector<LemmaReport> run_ascent_suite(std::uint64_t seed, int instances, int steps) {
  std::vector<LemmaReport> out;
  for (int i = 0; i < instances; ++i) {
    VerifyInstance inst = random_instance(seed + i);
    ExpFamilyEnv env(inst.config);
    LemmaReport r = check_monotone_ascent(env, inst.theta, steps);
    r.instance = inst.label;
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace pepg
