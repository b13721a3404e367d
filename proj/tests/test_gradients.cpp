#include "doctest.h"
#include "oracles.hpp"
#include "pepg/gradients.hpp"

using namespace pepg;

namespace {

PolicyParams random_params(int S, int A, std::uint64_t seed, double scale = 1.5) {
  Rng rng(seed);
  PolicyParams p = PolicyParams::zeros(S, A);
  for (int i = 0; i < p.dim(); ++i) p.theta.data()[i] = scale * rng.normal();
  return p;
}

ExpFamilyConfig expfam(int S, int A, double gamma, double xi = 0.6) {
  ExpFamilyConfig c;
  c.n_states = S;
  c.n_actions = A;
  c.gamma = gamma;
  c.xi = xi;
  return c;
}

struct Moments {
  double mean, se;
};
Moments moments(const std::vector<double>& xs) {
  double s = 0, s2 = 0;
  for (double x : xs) {
    s += x;
    s2 += x * x;
  }
  double n = xs.size(), m = s / n;
  return {m, std::sqrt((s2 / n - m * m) / (n - 1))};
}

}  // namespace

TEST_CASE("truncation horizon") {
  // gamma^T r_max / (1 - gamma) <= eps
  for (double g : {0.5, 0.9, 0.99}) {
    int T = truncation_horizon(g, 1.0, 1e-4);
    CHECK(std::pow(g, T) / (1 - g) <= 1e-4 * (1 + 1e-12));
    CHECK(std::pow(g, T - 1) / (1 - g) > 1e-4);
  }
  CHECK(truncation_horizon(0.9, 1.0, 1e-4) == 110);
}

TEST_CASE("minimal rollout") {
  Rng rng(1);
  TabularTables t = oracle::random_tables(3, 2, rng);
  StochasticPolicy pi = oracle::random_policy(3, 2, rng);
  auto trajs = collect_trajectories(t, pi, uniform_distribution(3), 1, 1, 9);
  REQUIRE(trajs.size() == 1);
  REQUIRE(trajs[0].size() == 1);
  const Step& s = trajs[0][0];
  CHECK(s.r == t.reward(s.s, s.a));
  CHECK(t.p(s.s, s.a, s.next) > 0.0);
}

TEST_CASE("deterministic MDP and policy give identical rollouts") {
  TabularTables t = TabularTables::zeros(3, 2);
  for (int s = 0; s < 3; ++s) {
    t.transition(t.row(s, 0), (s + 1) % 3) = 1.0;
    t.transition(t.row(s, 1), s) = 1.0;
    t.reward(s, 0) = s;
  }
  StochasticPolicy pi;
  pi.probs = Matrix::Zero(3, 2);
  pi.probs.col(0).setOnes();
  Vector rho = Vector::Zero(3);
  rho(1) = 1.0;
  auto trajs = collect_trajectories(t, pi, rho, 5, 7, 3);
  for (const auto& tr : trajs) {
    REQUIRE(tr.size() == 7);
    for (size_t k = 0; k < 7; ++k) {
      CHECK(tr[k].s == trajs[0][k].s);
      CHECK(tr[k].next == trajs[0][k].next);
    }
  }
  CHECK(trajs[0][0].s == 1);
  CHECK(trajs[0][1].s == 2);
}

TEST_CASE("trajectories do not depend on the batch size") {
  Rng rng(2);
  TabularTables t = oracle::random_tables(4, 3, rng);
  StochasticPolicy pi = oracle::random_policy(4, 3, rng);
  auto small = collect_trajectories(t, pi, uniform_distribution(4), 3, 20, 77);
  auto large = collect_trajectories(t, pi, uniform_distribution(4), 50, 20, 77);
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 20; ++k) {
      CHECK(small[i][k].s == large[i][k].s);
      CHECK(small[i][k].a == large[i][k].a);
    }
}

TEST_CASE("Monte Carlo return matches the exact value within the tail envelope") {
  Rng rng(3);
  TabularTables t = oracle::random_tables(3, 2, rng);
  StochasticPolicy pi = oracle::random_policy(3, 2, rng);
  const double g = 0.8;
  const int T = 15;
  Vector rho = uniform_distribution(3);
  auto trajs = collect_trajectories(t, pi, rho, 50000, T, 4);
  std::vector<double> returns;
  for (const auto& tr : trajs) returns.push_back(discounted_return(tr, g));
  Moments m = moments(returns);
  double exact = rho.dot(solve_value(t, pi, g));
  double tail = std::pow(g, T) * 1.0 / (1 - g);
  CHECK(std::abs(m.mean - exact) <= tail + 3 * m.se);
}

TEST_CASE("reward to go") {
  Trajectory tr{{0, 0, 0, 1.0}, {0, 0, 0, 2.0}, {0, 0, 0, 4.0}};
  auto r = reward_to_go(tr, 0.5);
  CHECK(r[2] == 4.0);
  CHECK(r[1] == 4.0);
  CHECK(r[0] == 3.0);
  CHECK(discounted_return(tr, 0.5) == 3.0);
}

TEST_CASE("value fit") {
  SUBCASE("one visit per state gives the reward-to-go") {
    Trajectory tr{{0, 0, 1, 1.0}, {1, 0, 2, 2.0}, {2, 0, 2, 3.0}};
    Vector v = fit_value({tr}, Vector::Constant(4, -7.0), 0.9);
    CHECK(v(2) == doctest::Approx(3.0));
    CHECK(v(1) == doctest::Approx(2.0 + 0.9 * 3.0));
    CHECK(v(0) == doctest::Approx(1.0 + 0.9 * 2.0 + 0.81 * 3.0));
    CHECK(v(3) == -7.0);  // unvisited keeps the warm start
  }
  SUBCASE("constant reward approaches c / (1 - gamma)") {
    Trajectory tr(400, Step{0, 0, 0, 0.5});
    Vector v = fit_value({tr}, Vector::Zero(1), 0.9);
    // mean over visits of a truncated geometric sum; visits near the end pull it down
    double expected = 0.0;
    for (int t = 0; t < 400; ++t) expected += 0.5 * (1 - std::pow(0.9, 400 - t)) / 0.1;
    CHECK(v(0) == doctest::Approx(expected / 400));
  }
  SUBCASE("large batch approaches the exact value") {
    Rng rng(5);
    TabularTables t = oracle::random_tables(3, 2, rng);
    StochasticPolicy pi = oracle::random_policy(3, 2, rng);
    const double g = 0.9;
    int T = truncation_horizon(g, 1.0, 1e-4);
    auto trajs = collect_trajectories(t, pi, uniform_distribution(3), 20000, 3 * T, 6);
    // only use the first T steps of each rollout so every reward-to-go has a long tail
    for (auto& tr : trajs) {
      auto rtg = reward_to_go(tr, g);
      tr.resize(T);
      for (int k = 0; k < T; ++k) tr[k].r = rtg[k] - (k + 1 < T ? g * rtg[k + 1] : 0.0);
    }
    Vector v = fit_value(trajs, Vector::Zero(3), g);
    Vector exact = solve_value(t, pi, g);
    CHECK((v - exact).cwiseAbs().maxCoeff() < 0.02 * 1.0 / (1 - g));
  }
}

TEST_CASE("estimator reduces to REINFORCE with a baseline") {
  // one state, uniform policy, gamma 0.5, baseline 0.2
  StochasticPolicy pi;
  pi.probs = Matrix::Constant(1, 2, 0.5);
  Trajectory tr{{0, 1, 0, 1.0}, {0, 0, 0, 0.0}};
  GradientEstimate est = pepg_gradient(pi, {tr}, Vector::Constant(1, 0.2), nullptr, 0.5);
  // 0.8 * (-0.5, 0.5) + 0.5 * (-0.2) * (0.5, -0.5)
  CHECK(est.grad(0, 0) == doctest::Approx(-0.45));
  CHECK(est.grad(0, 1) == doctest::Approx(0.45));
  CHECK(est.transition_term_norm == 0.0);

  EstimatorOptions flat;
  flat.discount_weights = false;
  GradientEstimate undiscounted = pepg_gradient(pi, {tr}, Vector::Constant(1, 0.2), nullptr, 0.5, flat);
  CHECK(undiscounted.grad(0, 1) == doctest::Approx(0.4 + 0.1));
}

TEST_CASE("static bandit gradient equals the classical softmax formula") {
  TabularTables t = TabularTables::zeros(1, 2);
  t.transition.setOnes();
  t.reward << 1.0, 0.3;
  const double g = 0.7;
  StaticEnv env(t, g, Vector::Ones(1));
  PolicyParams p = PolicyParams::zeros(1, 2);
  p.theta << 0.4, -0.2;
  StochasticPolicy pi = softmax(p);
  Vector v = solve_value(t, pi, g);
  QAdvantage qa = q_and_advantage(t, v, pi, g);
  OccupancyMeasure occ = occupancy(t, pi, g, Vector::Ones(1));
  Matrix fd = exact_gradient_fd(env, p);
  for (int a = 0; a < 2; ++a)
    CHECK(fd(0, a) == doctest::Approx(occ.d(0, a) * qa.advantage(0, a) / (1 - g)).epsilon(1e-8));
  // and zero at a stationary point of a symmetric problem
  t.reward << 0.5, 0.5;
  StaticEnv flat(t, g, Vector::Ones(1));
  CHECK(exact_gradient_fd(flat, p).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("occupancy form of the gradient matches finite differences") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    int S = 2 + seed % 3, A = 2 + seed % 2;
    ExpFamilyEnv env(expfam(S, A, seed % 2 ? 0.5 : 0.9));
    PolicyParams p = random_params(S, A, seed);
    for (double lam : {0.0, 2.0}) {
      Matrix occ = exact_gradient_occupancy(env, p, env.analytic_gradients(p), lam);
      Matrix fd = exact_gradient_fd(env, p, lam);
      for (int i = 0; i < occ.size(); ++i)
        CHECK(std::abs(occ.data()[i] - fd.data()[i]) <= 1e-5 * std::max(std::abs(fd.data()[i]), 1e-3));
    }
  }
}

TEST_CASE("estimator mean agrees with the exact gradient") {
  ExpFamilyEnv env(expfam(2, 2, 0.5));
  PolicyParams p = random_params(2, 2, 4, 1.0);
  StochasticPolicy pi = softmax(p);
  TabularTables t = env.induce(p);
  EnvGradients eg = env.analytic_gradients(p);
  Vector baseline = solve_value(t, pi, 0.5);
  auto trajs = collect_trajectories(t, pi, env.rho(), 40000, 40, 11);
  GradientEstimate est = pepg_gradient(pi, trajs, baseline, &eg, 0.5);
  Matrix exact = exact_gradient_fd(env, p);
  for (int i = 0; i < 4; ++i)
    CHECK(std::abs(est.grad.data()[i] - exact.data()[i]) < 4 * est.std_error.data()[i] + 1e-9);
}

TEST_CASE("baseline shift leaves the policy-score term unbiased") {
  ExpFamilyEnv env(expfam(2, 2, 0.5));
  PolicyParams p = random_params(2, 2, 5, 1.0);
  StochasticPolicy pi = softmax(p);
  TabularTables t = env.induce(p);
  Vector base = solve_value(t, pi, 0.5);
  auto trajs = collect_trajectories(t, pi, env.rho(), 20000, 40, 12);
  // paired difference per trajectory
  std::vector<std::vector<double>> diff(4);
  for (const auto& tr : trajs) {
    GradientEstimate a = pepg_gradient(pi, {tr}, base, nullptr, 0.5);
    GradientEstimate b = pepg_gradient(pi, {tr}, base.array() + 3.0, nullptr, 0.5);
    for (int i = 0; i < 4; ++i) diff[i].push_back(a.grad.data()[i] - b.grad.data()[i]);
  }
  for (int i = 0; i < 4; ++i) {
    Moments m = moments(diff[i]);
    CHECK(std::abs(m.mean) <= 3 * m.se + 1e-12);
  }
}

TEST_CASE("soften subtracts lambda log pi") {
  StochasticPolicy pi;
  pi.probs = Matrix(1, 2);
  pi.probs << 0.25, 0.75;
  Trajectory tr{{0, 0, 0, 1.0}};
  auto soft = soften({tr}, pi, 2.0);
  CHECK(soft[0][0].r == doctest::Approx(1.0 - 2.0 * std::log(0.25)));
}

TEST_CASE("mismatched provider shapes are rejected") {
  StochasticPolicy pi;
  pi.probs = Matrix::Constant(2, 2, 0.5);
  EnvGradients eg = EnvGradients::zeros(3, 2);
  Trajectory tr{{0, 0, 1, 0.0}};
  CHECK_THROWS_AS(pepg_gradient(pi, {tr}, Vector::Zero(2), &eg, 0.9), InvalidInput);
}
