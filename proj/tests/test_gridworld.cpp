#include "doctest.h"
#include "oracles.hpp"
#include "pepg/gradients.hpp"
#include "pepg/gridworld.hpp"

using namespace pepg;

namespace {

GridworldConfig small_grid(std::vector<std::string> rows, int followers = 1, double match = 0.7) {
  GridworldConfig c;
  c.layout = std::move(rows);
  c.followers = followers;
  c.match_prob = match;
  return c;
}

PolicyParams random_params(int S, int A, std::uint64_t seed, double scale = 1.0) {
  Rng rng(seed);
  PolicyParams p = PolicyParams::zeros(S, A);
  for (int i = 0; i < p.dim(); ++i) p.theta.data()[i] = scale * rng.normal();
  return p;
}

}  // namespace

TEST_CASE("default layout is 8x8 with one start and one goal") {
  GridLayout g(GridworldConfig::default_layout());
  CHECK(g.rows() == 8);
  CHECK(g.cols() == 8);
  CHECK(g.starts() == std::vector<int>{0});
  CHECK(g.cell(63) == Cell::Goal);
  int hazards = 0;
  for (int s = 0; s < g.n_states(); ++s) hazards += g.cell(s) == Cell::Hazard;
  CHECK(hazards == 12);
}

TEST_CASE("layout file matches built-in map") {
  CHECK(GridworldConfig::load_layout(PEPG_SOURCE_DIR "/grids/default8x8.txt") ==
        GridworldConfig::default_layout());
}

TEST_CASE("malformed layouts rejected") {
  CHECK_THROWS_AS(GridLayout({"S.", "..."}), InvalidInput);
  CHECK_THROWS_AS(GridLayout({"S.X"}), InvalidInput);
  CHECK_THROWS_AS(GridLayout({"..G"}), InvalidInput);
  CHECK_THROWS_AS(GridLayout(std::vector<std::string>{}), InvalidInput);
}

TEST_CASE("moves clamp at walls") {
  GridLayout g({"S..", "...", "..G"});
  CHECK(g.move(0, 0) == 0);
  CHECK(g.move(0, 2) == 0);
  CHECK(g.move(0, 1) == 3);
  CHECK(g.move(0, 3) == 1);
  CHECK(g.move(8, 1) == 8);
  CHECK(g.move(8, 3) == 8);
  CHECK(g.move(4, 0) == 1);
  CHECK(g.move(4, 2) == 3);
}

TEST_CASE("no-op follower reduces to the raw grid") {
  GridworldConfig c = small_grid({"S.H", "...", "H.G"});
  GridLayout g(c.layout);
  TabularTables t = raw_grid_tables(c);
  t.validate();
  for (int s = 0; s < g.n_states(); ++s)
    for (int a = 0; a < kPrincipalActions; ++a) {
      if (g.cell(s) == Cell::Goal) {
        CHECK(t.p(s, a, s) == 1.0);
        CHECK(t.reward(s, a) == 0.0);
        continue;
      }
      int dest = g.move(s, a);
      CHECK(t.p(s, a, dest) == 1.0);
      double expected = g.cell(dest) == Cell::Hazard ? c.cost_hazard
                        : g.cell(dest) == Cell::Goal ? c.cost_goal
                                                     : c.cost_blank;
      CHECK(t.reward(s, a) == doctest::Approx(expected).epsilon(1e-15));
    }
}

TEST_CASE("compose_tables with a deterministic intervention") {
  GridworldConfig c = small_grid({"S.G"});
  GridLayout g(c.layout);
  StochasticPolicy right;
  right.probs = Matrix::Zero(3, kFollowerActions);
  right.probs.col(4).setOnes();  // follower always forces "right"
  TabularTables t = compose_tables(c, g, right);
  for (int a = 0; a < kPrincipalActions; ++a) {
    CHECK(t.p(0, a, 1) == 1.0);
    CHECK(t.reward(0, a) == doctest::Approx(c.cost_blank + c.intervention_cost));
    CHECK(t.p(1, a, 2) == 1.0);
    CHECK(t.reward(1, a) == doctest::Approx(c.cost_goal + c.intervention_cost));
  }
}

TEST_CASE("match_prob one keeps the true grid") {
  GridworldConfig c = small_grid(GridworldConfig::default_layout(), 3, 1.0);
  Rng rng(5);
  auto grids = sample_perturbed_layouts(c, rng);
  REQUIRE(grids.size() == 3);
  GridLayout truth(c.layout);
  for (const auto& g : grids)
    for (int s = 0; s < g.n_states(); ++s) CHECK(g.cell(s) == truth.cell(s));
}

TEST_CASE("perturbation rate matches the resampling probability") {
  // a cell changes when resampled (prob 0.3) to one of the other three types (3/4)
  GridworldConfig c = small_grid(GridworldConfig::default_layout(), 1, 0.7);
  Rng rng(11);
  GridLayout truth(c.layout);
  int changed = 0, total = 0;
  for (int rep = 0; rep < 400; ++rep) {
    auto grids = sample_perturbed_layouts(c, rng);
    for (int s = 0; s < truth.n_states(); ++s, ++total) changed += grids[0].cell(s) != truth.cell(s);
  }
  double rate = double(changed) / total, expected = 0.3 * 0.75;
  double se = std::sqrt(expected * (1 - expected) / total);
  CHECK(std::abs(rate - expected) < 4 * se);
}

TEST_CASE("follower intervenes only when the principal heads the wrong way") {
  GridworldConfig c = small_grid({"S.G"}, 1, 1.0);
  c.boltzmann = 200.0;
  c.cost_blank = -0.2;  // idling must cost more than two interventions
  GridworldEnv env(c, 1);
  PolicyParams toward = PolicyParams::zeros(3, 4), away = PolicyParams::zeros(3, 4);
  toward.theta.col(3).setConstant(30.0);  // right
  away.theta.col(2).setConstant(30.0);    // left
  std::vector<GridLayout> truth{GridLayout(c.layout)};
  StochasticPolicy f_toward = follower_response(c, truth, softmax(toward));
  StochasticPolicy f_away = follower_response(c, truth, softmax(away));
  CHECK(f_toward.probs(0, 0) > 0.99);
  CHECK(f_away.probs(0, 4) > 0.99);
}

TEST_CASE("zero Boltzmann coefficient gives a uniform follower") {
  GridworldConfig c = small_grid({"S.H", "..G"}, 1, 1.0);
  c.boltzmann = 0.0;
  std::vector<GridLayout> grids{GridLayout(c.layout)};
  StochasticPolicy f = follower_response(c, grids, softmax(random_params(6, 4, 3)));
  CHECK((f.probs.array() - 0.2).abs().maxCoeff() < 1e-15);
}

TEST_CASE("follower Q matches brute-force enumeration of follower policies") {
  // the Boltzmann logits are beta * Q*; recover Q* differences from log-ratios
  GridworldConfig c = small_grid({"S.H", "..G"}, 1, 1.0);
  c.boltzmann = 1.0;
  std::vector<GridLayout> grids{GridLayout(c.layout)};
  PolicyParams params = random_params(6, 4, 9);
  StochasticPolicy principal = softmax(params);
  StochasticPolicy f = follower_response(c, grids, principal);

  // follower MDP built by hand
  const GridLayout& g = grids[0];
  TabularTables ft = TabularTables::zeros(6, kFollowerActions);
  for (int s = 0; s < 6; ++s) {
    if (g.cell(s) == Cell::Goal) {
      for (int b = 0; b < 5; ++b) ft.transition(ft.row(s, b), s) = 1.0;
      continue;
    }
    for (int b = 0; b < 5; ++b) {
      for (int a = 0; a < 4; ++a) {
        double w = b == 0 ? principal.probs(s, a) : (a == b - 1 ? 1.0 : 0.0);
        int dest = g.move(s, a);
        ft.transition(ft.row(s, b), dest) += w;
        ft.reward(s, b) += w * g.cost(dest, c);
      }
      if (b > 0) ft.reward(s, b) += c.intervention_cost;
    }
  }
  // optimal value by enumeration, per start state
  Vector vstar(6);
  for (int s = 0; s < 6; ++s) {
    Vector rho = Vector::Zero(6);
    rho(s) = 1.0;
    vstar(s) = oracle::best_deterministic_value(ft, c.gamma, rho);
  }
  for (int s = 0; s < 6; ++s) {
    Eigen::RowVectorXd q(5);
    for (int b = 0; b < 5; ++b) q(b) = ft.reward(s, b) + c.gamma * ft.transition.row(ft.row(s, b)).dot(vstar);
    for (int b = 1; b < 5; ++b)
      CHECK(std::log(f.probs(s, b) / f.probs(s, 0)) == doctest::Approx(q(b) - q(0)).epsilon(1e-9));
  }
}

TEST_CASE("env perturbations are frozen per seed") {
  GridworldConfig c;
  GridworldEnv a(c, 42), b(c, 42), other(c, 43);
  PolicyParams p = random_params(64, 4, 1);
  TabularTables ta = a.induce(p), tb = b.induce(p);
  CHECK(ta.transition == tb.transition);
  CHECK(ta.reward == tb.reward);
  CHECK(a.induce(p).transition == ta.transition);  // no re-sampling between calls
  bool differs = false;
  for (int s = 0; s < 64; ++s) differs |= a.perceived()[0].cell(s) != other.perceived()[0].cell(s);
  CHECK(differs);
  ta.validate();
}

TEST_CASE("start distribution and r_max") {
  GridworldConfig c = small_grid({"S.S", "..G"});
  GridworldEnv env(c, 0);
  CHECK(env.rho()(0) == 0.5);
  CHECK(env.rho()(2) == 0.5);
  CHECK(env.rho().sum() == doctest::Approx(1.0));
  CHECK(env.r_max() == doctest::Approx(0.55));
}

TEST_CASE("shortest path policy points along a BFS path") {
  GridworldConfig c = small_grid({"S.H", "..G"});
  GridworldEnv env(c, 0);
  StochasticPolicy pi = env.shortest_path_policy(0.0);
  pi.validate();
  // from (0,0) both right and down are on shortest paths; ties go to the lowest index (down)
  CHECK(pi.probs(0, 1) == 1.0);
  CHECK(pi.probs(4, 3) == 1.0);
  StochasticPolicy mixed = env.shortest_path_policy(0.5);
  CHECK(mixed.probs(4, 3) == doctest::Approx(0.625));
  CHECK(mixed.probs(4, 0) == doctest::Approx(0.125));
}

TEST_CASE("analytic gridworld gradients match finite differences") {
  for (int followers : {1, 3}) {
    GridworldConfig c = small_grid({"S..H", ".H..", "...H", "H..G"}, followers);
    GridworldEnv env(c, 7 + followers);
    PolicyParams p = random_params(16, 4, 100 + followers);
    EnvGradients an = env.analytic_gradients(p);
    EnvGradients fd = env_grad_fd(env, p, 1e-5);
    CHECK(an.zero_prob_entries == fd.zero_prob_entries);
    double scale = std::max(1.0, fd.dlog_p.cwiseAbs().maxCoeff());
    CHECK((an.dlog_p - fd.dlog_p).cwiseAbs().maxCoeff() < 1e-6 * scale);
    CHECK((an.dr - fd.dr).cwiseAbs().maxCoeff() < 1e-6);
    CHECK(an.dlog_p.cwiseAbs().maxCoeff() > 1e-3);  // not trivially zero
  }
}

TEST_CASE("gridworld exact gradient agrees with finite differences of the value") {
  GridworldConfig c = small_grid({"S..H", ".H..", "...H", "H..G"}, 2);
  GridworldEnv env(c, 3);
  PolicyParams p = random_params(16, 4, 77, 0.5);
  Matrix occ = exact_gradient_occupancy(env, p, env.analytic_gradients(p));
  Matrix fd = exact_gradient_fd(env, p);
  CHECK((occ - fd).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("induced reward at a hazard-adjacent state by enumeration") {
  GridworldConfig c;  // default 8x8, state 3 sits left of the hazard at 4
  GridworldEnv env(c, 21);
  PolicyParams uniform = PolicyParams::zeros(64, 4);
  TabularTables t = env.induce(uniform);
  StochasticPolicy f = follower_response(c, env.perceived(), softmax(uniform));
  const GridLayout& g = env.layout();
  const int s = 3;
  REQUIRE(g.cell(g.move(s, 3)) == Cell::Hazard);
  for (int a = 0; a < 4; ++a) {
    double expected = 0.0, to_hazard = 0.0;
    for (int b = 0; b < kFollowerActions; ++b) {
      int dest = g.move(s, b == 0 ? a : b - 1);
      expected += f.probs(s, b) * g.cost(dest, c);
      if (b > 0) expected += f.probs(s, b) * c.intervention_cost;
      if (dest == 4) to_hazard += f.probs(s, b);
    }
    CHECK(t.reward(s, a) == doctest::Approx(expected).epsilon(1e-14));
    CHECK(t.p(s, a, 4) == doctest::Approx(to_hazard).epsilon(1e-14));
  }
  // heading right means entering the hazard unless the follower steps in
  CHECK(t.reward(s, 3) < t.reward(s, 2));
}

TEST_CASE("follower response repeats exactly on an unperturbed grid") {
  GridworldConfig c = small_grid(GridworldConfig::default_layout(), 2, 1.0);
  PolicyParams p = random_params(64, 4, 5);
  Rng r1(8), r2(8);
  CHECK(gridworld_follower_response(c, softmax(p), r1).probs ==
        gridworld_follower_response(c, softmax(p), r2).probs);
  for (int rep = 0; rep < 3; ++rep) {
    TabularTables t = gridworld_induce(c, random_params(64, 4, 30 + rep, 3.0), r1);
    CHECK(((t.transition.rowwise().sum().array() - 1.0).abs() < 1e-12).all());
  }
}
