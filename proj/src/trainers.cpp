#include "pepg/trainers.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <deque>
#include <mutex>
#include <thread>

#include "pepg/verify.hpp"

namespace pepg {

Algorithm parse_algorithm(const std::string& name) {
  if (name == "pepg") return Algorithm::Pepg;
  if (name == "pepg-reg") return Algorithm::PepgReg;
  if (name == "vanilla-pg") return Algorithm::VanillaPg;
  if (name == "rpo-fs") return Algorithm::RepeatedRetraining;
  if (name == "mdrr") return Algorithm::Mdrr;
  if (name == "loan-reinforce") return Algorithm::LoanReinforce;
  if (name == "loan-pepg") return Algorithm::LoanPepg;
  throw InvalidInput("unknown algorithm: " + name);
}

std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::Pepg: return "pepg";
    case Algorithm::PepgReg: return "pepg-reg";
    case Algorithm::VanillaPg: return "vanilla-pg";
    case Algorithm::RepeatedRetraining: return "rpo-fs";
    case Algorithm::Mdrr: return "mdrr";
    case Algorithm::LoanReinforce: return "loan-reinforce";
    case Algorithm::LoanPepg: return "loan-pepg";
  }
  return "?";
}

std::unique_ptr<PerformativeEnv> make_env(const EnvSpec& spec, std::uint64_t seed) {
  switch (spec.kind) {
    case EnvKind::ExpFamily: return std::make_unique<ExpFamilyEnv>(spec.expfam);
    case EnvKind::Gridworld:
      return std::make_unique<GridworldEnv>(spec.grid, mix_seed(seed, 0x67726964));
    case EnvKind::Static: {
      const int S = static_cast<int>(spec.static_rewards.size());
      if (S == 0) throw InvalidInput("static env needs at least one reward row");
      const int A = static_cast<int>(spec.static_rewards[0].size());
      TabularTables t = TabularTables::zeros(S, A);
      double rmax = 0.0;
      for (int s = 0; s < S; ++s) {
        if (static_cast<int>(spec.static_rewards[s].size()) != A)
          throw InvalidInput("static rewards must be rectangular");
        for (int a = 0; a < A; ++a) {
          t.reward(s, a) = spec.static_rewards[s][a];
          t.transition(t.row(s, a), s) = 1.0;
          rmax = std::max(rmax, std::abs(t.reward(s, a)));
        }
      }
      return std::make_unique<StaticEnv>(t, spec.static_gamma, uniform_distribution(S),
                                         std::max(rmax, 1e-12));
    }
    case EnvKind::Loan: throw InvalidInput("loan env is not tabular");
  }
  throw InvalidInput("unknown env kind");
}

double TrainConfig::effective_lambda() const {
  return algorithm == Algorithm::PepgReg ? lambda : 0.0;
}

void TrainConfig::validate() const {
  if (!(eta >= 0.0) || !std::isfinite(eta)) throw InvalidInput("eta must be non-negative");
  if (iterations < 1) throw InvalidInput("iterations must be >= 1");
  if (!(lambda >= 0.0)) throw InvalidInput("lambda must be non-negative");
  if (trajectories < 1) throw InvalidInput("trajectories must be >= 1");
  if (horizon < 0) throw InvalidInput("horizon must be >= 0");
  if (!(lambda_base > 0.0)) throw InvalidInput("lambda_base must be positive");
  if (!(memory_weight > 0.0)) throw InvalidInput("memory_weight must be positive");
  if (delay < 1) throw InvalidInput("delay must be >= 1");
  if (memory < 1) throw InvalidInput("memory must be >= 1");
  if (!(initial_epsilon >= 0.0 && initial_epsilon <= 1.0))
    throw InvalidInput("initial_epsilon must lie in [0, 1]");
  bool loan_algo = algorithm == Algorithm::LoanReinforce || algorithm == Algorithm::LoanPepg;
  if (loan_algo != (env.kind == EnvKind::Loan))
    throw InvalidInput("loan algorithms require the loan env and vice versa");
}

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point t0, bool record) {
  if (!record) return 0.0;
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

struct Deployed {
  TabularTables tables;
  StochasticPolicy policy;
  OccupancyMeasure occ;
};

Deployed deploy(const PerformativeEnv& env, const PolicyParams& params) {
  Deployed d{env.induce(params), softmax(params), {}};
  d.occ = occupancy(d.tables, d.policy, env.gamma(), env.rho());
  return d;
}

struct MonteCarlo {
  double mean = 0.0;
  double stderr_ = 0.0;
};

MonteCarlo mc_return(const std::vector<Trajectory>& trajs, double gamma) {
  double sum = 0.0, sq = 0.0;
  for (const auto& t : trajs) {
    double g = discounted_return(t, gamma);
    sum += g;
    sq += g * g;
  }
  double n = static_cast<double>(trajs.size());
  MonteCarlo mc;
  mc.mean = sum / n;
  double var = n > 1 ? std::max(0.0, (sq - n * mc.mean * mc.mean) / (n - 1)) : 0.0;
  mc.stderr_ = std::sqrt(var / n);
  return mc;
}

int resolve_horizon(const TrainConfig& c, const PerformativeEnv& env) {
  return c.horizon > 0 ? c.horizon : truncation_horizon(env.gamma(), env.r_max(), c.tail_eps);
}

std::uint64_t iteration_seed(const TrainConfig& c, int k) {
  return mix_seed(c.seed, 0x1000000ULL + static_cast<std::uint64_t>(k));
}

RunRecord start_record(const TrainConfig& c) {
  RunRecord rec;
  rec.algo = to_string(c.algorithm);
  rec.seed = c.seed;
  return rec;
}

ProviderOptions provider_for(const TrainConfig& c, const PerformativeEnv& env, int k) {
  ProviderOptions p = c.provider;
  if (c.algorithm == Algorithm::VanillaPg) {
    p.kind = GradProvider::Zero;
  } else if (c.provider_from_env) {
    p.kind = env.has_analytic_gradients() ? GradProvider::Analytic : GradProvider::FiniteDifference;
  }
  p.seed = mix_seed(c.seed, 0x2000000ULL + static_cast<std::uint64_t>(k));
  return p;
}

StochasticPolicy baseline_initial_policy(const TrainConfig& c, const PerformativeEnv& env) {
  if (auto* grid = dynamic_cast<const GridworldEnv*>(&env))
    return grid->shortest_path_policy(c.initial_epsilon);
  StochasticPolicy pi;
  pi.probs = Matrix::Constant(env.n_states(), env.n_actions(), 1.0 / env.n_actions());
  return pi;
}

RunRecord run_policy_gradient(const TrainConfig& c) {
  c.validate();
  auto env = make_env(c.env, c.seed);
  RunRecord rec = start_record(c);
  const double gamma = env->gamma(), lambda = c.effective_lambda();
  const int horizon = resolve_horizon(c, *env);
  double eta = c.eta;
  if (c.eta_from_smoothness) {
    auto* ef = dynamic_cast<const ExpFamilyEnv*>(env.get());
    if (!ef) throw InvalidInput("eta_from_smoothness needs the exponential-family env");
    eta = 1.0 / expfam_smoothness(ef->config()).value;
  }
  PolicyParams theta = PolicyParams::zeros(env->n_states(), env->n_actions());
  Deployed cur = deploy(*env, theta);
  Vector v_hat = Vector::Zero(env->n_states());
  EstimatorOptions opts;
  opts.lambda = lambda;
  opts.discount_weights = c.discount_weights;
  for (int k = 0; k < c.iterations; ++k) {
    auto t0 = Clock::now();
    RunRow row;
    row.iteration = k;
    auto raw = collect_trajectories(cur.tables, cur.policy, env->rho(), c.trajectories, horizon,
                                    iteration_seed(c, k));
    MonteCarlo mc = mc_return(raw, gamma);
    row.mc_return = mc.mean;
    row.mc_stderr = mc.stderr_;
    row.exact_value = value_at(solve_value(cur.tables, cur.policy, gamma), env->rho());
    auto trajs = soften(std::move(raw), cur.policy, lambda);
    Matrix grad;
    if (c.exact_gradient) {
      grad = env->has_analytic_gradients()
                 ? exact_gradient_occupancy(*env, theta, env->analytic_gradients(theta), lambda)
                 : exact_gradient_fd(*env, theta, lambda);
    } else {
      ProviderOptions p = provider_for(c, *env, k);
      if (p.kind == GradProvider::Zero) {
        grad = pepg_gradient(cur.policy, trajs, v_hat, nullptr, gamma, opts).grad;
      } else {
        EnvGradients eg = env_gradients(*env, theta, p);
        grad = pepg_gradient(cur.policy, trajs, v_hat, &eg, gamma, opts).grad;
      }
    }
    if (!grad.allFinite()) {
      rec.aborted = true;
      rec.abort_reason = "non-finite gradient at iteration " + std::to_string(k);
      break;
    }
    v_hat = fit_value(trajs, v_hat, gamma);
    theta.theta += eta * grad;
    row.grad_norm = grad.norm();
    Deployed next = deploy(*env, theta);
    row.stability = (next.occ.d - cur.occ.d).norm();
    cur = std::move(next);
    row.wall_ms = elapsed_ms(t0, c.record_wall_time);
    rec.rows.push_back(row);
  }
  rec.final_theta = theta.theta;
  rec.summary["final_exact_value"] = value_at(solve_value(cur.tables, cur.policy, gamma), env->rho());
  rec.summary["final_soft_value"] =
      lambda > 0 ? value_at(solve_soft_value(cur.tables, cur.policy, gamma, lambda), env->rho())
                 : rec.summary["final_exact_value"];
  rec.summary["eta"] = eta;
  rec.summary["horizon"] = horizon;
  return rec;
}

}  // namespace

RunRecord run_pepg(const TrainConfig& config) {
  if (config.algorithm != Algorithm::Pepg && config.algorithm != Algorithm::PepgReg)
    throw InvalidInput("run_pepg needs algorithm pepg or pepg-reg");
  return run_policy_gradient(config);
}

RunRecord run_vanilla_pg(const TrainConfig& config) {
  TrainConfig c = config;
  c.algorithm = Algorithm::VanillaPg;
  return run_policy_gradient(c);
}

TabularTables estimate_tables(const std::vector<Trajectory>& trajs, const TabularTables& fallback) {
  const int S = fallback.n_states, A = fallback.n_actions;
  Matrix counts = Matrix::Zero(S * A, S);
  Matrix reward_sum = Matrix::Zero(S, A);
  Matrix visits = Matrix::Zero(S, A);
  for (const auto& traj : trajs)
    for (const auto& st : traj) {
      counts(st.s * A + st.a, st.next) += 1.0;
      reward_sum(st.s, st.a) += st.r;
      visits(st.s, st.a) += 1.0;
    }
  TabularTables out = fallback;
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a) {
      double n = visits(s, a);
      if (n == 0.0) continue;
      out.transition.row(s * A + a) = counts.row(s * A + a) / n;
      out.reward(s, a) = reward_sum(s, a) / n;
    }
  return out;
}

namespace {

RunRecord run_retraining(const TrainConfig& c, bool mixed) {
  c.validate();
  auto env = make_env(c.env, c.seed);
  RunRecord rec = start_record(c);
  const double gamma = env->gamma();
  const int horizon = resolve_horizon(c, *env);
  StochasticPolicy pi = baseline_initial_policy(c, *env);
  PolicyParams theta = logits_of(pi);
  Deployed cur = deploy(*env, theta);
  std::deque<TabularTables> memory;
  TabularTables prior = env->prior_tables();
  int inner_iterations = 0;
  for (int k = 0; k < c.iterations; ++k) {
    auto t0 = Clock::now();
    RunRow row;
    row.iteration = k;
    auto trajs = collect_trajectories(cur.tables, cur.policy, env->rho(), c.trajectories, horizon,
                                      iteration_seed(c, k));
    MonteCarlo mc = mc_return(trajs, gamma);
    row.mc_return = mc.mean;
    row.mc_stderr = mc.stderr_;
    row.exact_value = value_at(solve_value(cur.tables, cur.policy, gamma), env->rho());

    bool retrain = true;
    TabularTables target;
    if (!mixed) {
      target = cur.tables;
    } else {
      const TabularTables& fallback = memory.empty() ? prior : memory.back();
      memory.push_back(c.mdrr_exact_estimates ? cur.tables : estimate_tables(trajs, fallback));
      if (static_cast<int>(memory.size()) > c.memory) memory.pop_front();
      retrain = (k + 1) % c.delay == 0;
      if (retrain) {
        target = TabularTables::zeros(env->n_states(), env->n_actions());
        double total = 0.0, w = 1.0;
        for (const auto& m : memory) {  // oldest first, weight grows by v per round
          target.transition += w * m.transition;
          target.reward += w * m.reward;
          total += w;
          w *= c.memory_weight;
        }
        target.transition /= total;
        target.reward /= total;
      }
    }
    if (retrain) {
      SoftOptimum sol = solve_soft_optimal(target, gamma, c.lambda_base, 1e-13, 10000);
      if (!sol.converged) {
        rec.aborted = true;
        rec.abort_reason = "inner solver did not converge at iteration " + std::to_string(k);
        break;
      }
      inner_iterations += sol.iterations;
      if ((sol.policy.probs.array() <= 0.0).any()) {
        rec.aborted = true;
        rec.abort_reason = "retrained policy has zero entries";
        break;
      }
      theta = logits_of(sol.policy);
    }
    Deployed next = retrain ? deploy(*env, theta) : cur;
    row.stability = (next.occ.d - cur.occ.d).norm();
    cur = std::move(next);
    row.wall_ms = elapsed_ms(t0, c.record_wall_time);
    rec.rows.push_back(row);
  }
  rec.final_theta = theta.theta;
  rec.summary["final_exact_value"] = value_at(solve_value(cur.tables, cur.policy, gamma), env->rho());
  rec.summary["final_best_response_gap"] =
      soft_improvement_gap(cur.tables, cur.policy, gamma, c.lambda_base);
  rec.summary["inner_iterations"] = inner_iterations;
  return rec;
}

}  // namespace

RunRecord run_repeated_retraining(const TrainConfig& config) {
  TrainConfig c = config;
  c.algorithm = Algorithm::RepeatedRetraining;
  return run_retraining(c, false);
}

RunRecord run_mdrr(const TrainConfig& config) {
  TrainConfig c = config;
  c.algorithm = Algorithm::Mdrr;
  return run_retraining(c, true);
}

RunRecord run_loan_protocol(const TrainConfig& c) {
  c.validate();
  const LoanConfig& lc = c.env.loan;
  lc.validate();
  RunRecord rec = start_record(c);
  const bool performative = c.algorithm == Algorithm::LoanPepg;
  double theta = lc.theta0, mu = lc.mu0;
  bool all_converged = true;
  for (int k = 0; k < c.iterations; ++k) {
    auto t0 = Clock::now();
    Rng rng(iteration_seed(c, k));
    const int n = c.trajectories;
    std::vector<double> x(n), reward(n), score(n);
    double mean_reward = 0.0;
    for (int i = 0; i < n; ++i) {
      x[i] = mu + lc.sigma * rng.normal();
      double p = loan_policy(lc, theta, x[i]);
      bool grant = rng.uniform() < p;
      bool repay = rng.uniform() < sigmoid(lc.repay_slope * x[i] - lc.repay_offset);
      reward[i] = grant ? (repay ? lc.payoff : -lc.loss) : 0.0;
      // d/dtheta log of the realized decision probability
      score[i] = grant ? -lc.sharpness * (1.0 - p) : lc.sharpness * p;
      mean_reward += reward[i] / n;
    }
    double slope = 0.0;
    if (performative) {
      slope = loan_equilibrium_slope(lc, theta);
      all_converged = all_converged && loan_equilibrium_mean(lc, theta).converged;
    }
    double grad = 0.0;
    for (int i = 0; i < n; ++i) {
      double centered = reward[i] - mean_reward;
      grad += centered * score[i];
      if (performative) grad += centered * (x[i] - mu) / (lc.sigma * lc.sigma) * slope;
    }
    grad /= n;
    if (!std::isfinite(grad)) {
      rec.aborted = true;
      rec.abort_reason = "non-finite gradient at iteration " + std::to_string(k);
      break;
    }
    RunRow row;
    row.iteration = k;
    row.mc_return = mean_reward;
    LoanEquilibrium eq = loan_equilibrium_mean(lc, theta);
    all_converged = all_converged && eq.converged;
    row.exact_value = loan_utility(lc, theta, eq.mu);
    row.grad_norm = std::abs(grad);
    double next_mu = (1.0 - lc.beta) * mu + lc.beta * loan_feedback(lc, loan_grant_rate(lc, theta, mu));
    theta += c.eta * grad;
    row.stability = std::abs(next_mu - mu);
    mu = next_mu;
    row.wall_ms = elapsed_ms(t0, c.record_wall_time);
    rec.rows.push_back(row);
  }
  LoanOptimum erm = loan_erm_optimum(lc), perf = loan_performative_optimum(lc);
  rec.final_theta = Matrix::Constant(1, 1, theta);
  rec.summary["theta_learned"] = theta;
  rec.summary["utility_learned"] = loan_equilibrium_utility(lc, theta);
  rec.summary["theta_erm"] = erm.theta;
  rec.summary["utility_erm"] = loan_equilibrium_utility(lc, erm.theta);
  rec.summary["theta_perf"] = perf.theta;
  rec.summary["utility_perf"] = perf.utility;
  rec.summary["final_mu"] = mu;
  rec.summary["equilibrium_converged"] = all_converged ? 1.0 : 0.0;
  return rec;
}

RunRecord run(const TrainConfig& config) {
  switch (config.algorithm) {
    case Algorithm::Pepg:
    case Algorithm::PepgReg: return run_pepg(config);
    case Algorithm::VanillaPg: return run_vanilla_pg(config);
    case Algorithm::RepeatedRetraining: return run_repeated_retraining(config);
    case Algorithm::Mdrr: return run_mdrr(config);
    case Algorithm::LoanReinforce:
    case Algorithm::LoanPepg: return run_loan_protocol(config);
  }
  throw InvalidInput("unknown algorithm");
}

namespace {

std::vector<AggregateRow> aggregate(const std::vector<RunRecord>& runs, bool exact) {
  std::vector<AggregateRow> out;
  if (runs.empty()) return out;
  size_t len = runs[0].rows.size();
  for (const auto& r : runs) len = std::min(len, r.rows.size());
  for (size_t i = 0; i < len; ++i) {
    double sum = 0.0, sq = 0.0;
    for (const auto& r : runs) {
      double v = exact ? r.rows[i].exact_value : r.rows[i].mc_return;
      sum += v;
      sq += v * v;
    }
    double n = static_cast<double>(runs.size());
    AggregateRow row;
    row.iteration = static_cast<int>(i);
    row.mean = sum / n;
    double var = n > 1 ? std::max(0.0, (sq - n * row.mean * row.mean) / (n - 1)) : 0.0;
    row.stderr_ = std::sqrt(var / n);
    out.push_back(row);
  }
  return out;
}

}  // namespace

std::vector<SweepEntry> sweep(const std::vector<TrainConfig>& configs,
                              const std::vector<std::uint64_t>& seeds, int jobs) {
  if (configs.empty()) throw InvalidInput("sweep needs at least one config");
  if (seeds.empty()) throw InvalidInput("sweep needs at least one seed");
  std::vector<SweepEntry> out(configs.size());
  std::vector<std::vector<RunRecord>> slots(configs.size(), std::vector<RunRecord>(seeds.size()));
  std::vector<std::vector<std::string>> errors(configs.size(), std::vector<std::string>(seeds.size()));
  std::atomic<size_t> next{0};
  const size_t total = configs.size() * seeds.size();
  auto worker = [&]() {
    for (size_t job = next++; job < total; job = next++) {
      size_t ci = job / seeds.size(), si = job % seeds.size();
      TrainConfig c = configs[ci];
      c.seed = seeds[si];
      try {
        slots[ci][si] = run(c);
      } catch (const std::exception& e) {
        errors[ci][si] = e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int j = 1; j < std::max(1, jobs); ++j) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (size_t ci = 0; ci < configs.size(); ++ci) {
    out[ci].config = configs[ci];
    for (size_t si = 0; si < seeds.size(); ++si) {
      if (!errors[ci][si].empty()) {
        out[ci].failures.push_back("seed " + std::to_string(seeds[si]) + ": " + errors[ci][si]);
        continue;
      }
      if (slots[ci][si].aborted)
        out[ci].failures.push_back("seed " + std::to_string(seeds[si]) + ": " + slots[ci][si].abort_reason);
      out[ci].runs.push_back(std::move(slots[ci][si]));
    }
    out[ci].exact_value = aggregate(out[ci].runs, true);
    out[ci].mc_return = aggregate(out[ci].runs, false);
  }
  return out;
}

}  // namespace pepg
