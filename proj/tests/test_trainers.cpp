#include "doctest.h"
#include "oracles.hpp"
#include "pepg/io.hpp"
#include "pepg/trainers.hpp"

using namespace pepg;

namespace {

TrainConfig bandit(Algorithm algo, int iterations) {
  TrainConfig c;
  c.algorithm = algo;
  c.env.kind = EnvKind::Static;
  c.env.static_rewards = {{1.0, 0.5, 0.0}};
  c.env.static_gamma = 0.9;
  c.iterations = iterations;
  c.trajectories = 20;
  c.seed = 3;
  return c;
}

TrainConfig expfam(Algorithm algo, int iterations) {
  TrainConfig c;
  c.algorithm = algo;
  c.env.kind = EnvKind::ExpFamily;
  c.env.expfam.n_states = 3;
  c.env.expfam.n_actions = 2;
  c.env.expfam.gamma = 0.9;
  c.iterations = iterations;
  c.trajectories = 30;
  c.seed = 5;
  return c;
}

}  // namespace

TEST_CASE("algorithm names round-trip") {
  for (Algorithm a : {Algorithm::Pepg, Algorithm::PepgReg, Algorithm::VanillaPg,
                      Algorithm::RepeatedRetraining, Algorithm::Mdrr, Algorithm::LoanReinforce,
                      Algorithm::LoanPepg})
    CHECK(parse_algorithm(to_string(a)) == a);
  CHECK_THROWS_AS(parse_algorithm("ppo"), InvalidInput);
}

TEST_CASE("config validation") {
  TrainConfig c = bandit(Algorithm::Pepg, 10);
  c.eta = -0.1;
  CHECK_THROWS_AS(c.validate(), InvalidInput);
  c = bandit(Algorithm::LoanPepg, 10);
  CHECK_THROWS_AS(c.validate(), InvalidInput);
  c = bandit(Algorithm::Pepg, 0);
  CHECK_THROWS_AS(c.validate(), InvalidInput);
  CHECK(bandit(Algorithm::Pepg, 1).effective_lambda() == 0.0);
  CHECK(bandit(Algorithm::PepgReg, 1).effective_lambda() == 2.0);
}

TEST_CASE("bandit: PePG concentrates on the best arm") {
  RunRecord rec = run(bandit(Algorithm::Pepg, 500));
  REQUIRE(rec.rows.size() == 500);
  StochasticPolicy pi = softmax(PolicyParams{rec.final_theta});
  CHECK(pi.probs(0, 0) >= 0.95);
  // exact-gradient ascent oracle reaches the same arm
  TrainConfig exact = bandit(Algorithm::Pepg, 500);
  exact.exact_gradient = true;
  CHECK(softmax(PolicyParams{run(exact).final_theta}).probs(0, 0) >= 0.95);
}

TEST_CASE("zero step size freezes the policy") {
  TrainConfig c = expfam(Algorithm::Pepg, 8);
  c.eta = 0.0;
  RunRecord rec = run(c);
  for (const auto& row : rec.rows) {
    CHECK(row.exact_value == rec.rows[0].exact_value);
    CHECK(row.stability == 0.0);
  }
  CHECK(rec.final_theta.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("vanilla PG equals PePG on a static env") {
  RunRecord a = run(bandit(Algorithm::Pepg, 30)), b = run(bandit(Algorithm::VanillaPg, 30));
  CHECK(a.final_theta == b.final_theta);
  for (size_t k = 0; k < a.rows.size(); ++k) CHECK(a.rows[k].exact_value == b.rows[k].exact_value);
}

TEST_CASE("runs are deterministic per seed") {
  for (Algorithm algo : {Algorithm::Pepg, Algorithm::PepgReg, Algorithm::Mdrr}) {
    TrainConfig c = expfam(algo, 15);
    CHECK(run_csv(run(c)) == run_csv(run(c)));
    TrainConfig other = c;
    other.seed = 6;
    CHECK(run_csv(run(c)) != run_csv(run(other)));
  }
}

TEST_CASE("repeated retraining on a static env settles after one round") {
  RunRecord rec = run(bandit(Algorithm::RepeatedRetraining, 5));
  CHECK(rec.rows[0].stability > 0.0);
  for (size_t k = 1; k < rec.rows.size(); ++k) CHECK(rec.rows[k].stability == 0.0);
}

TEST_CASE("repeated retraining ends at a best response to its own environment") {
  TrainConfig c = expfam(Algorithm::RepeatedRetraining, 60);
  RunRecord rec = run(c);
  CHECK(rec.summary.at("final_best_response_gap") <= 1e-6);
  // independent check of the gap on the induced tables
  auto env = make_env(c.env, c.seed);
  PolicyParams theta{rec.final_theta};
  TabularTables t = env->induce(theta);
  SoftOptimum opt = solve_soft_optimal(t, 0.9, c.lambda_base);
  Vector own = solve_soft_value(t, softmax(theta), 0.9, c.lambda_base);
  CHECK((opt.value - own).maxCoeff() <= 1e-6);
}

TEST_CASE("MDRR with newest-only memory and no delay is repeated retraining") {
  TrainConfig m = expfam(Algorithm::Mdrr, 20);
  m.memory = 1;
  m.delay = 1;
  m.mdrr_exact_estimates = true;
  TrainConfig r = expfam(Algorithm::RepeatedRetraining, 20);
  RunRecord a = run(m), b = run(r);
  REQUIRE(a.rows.size() == b.rows.size());
  for (size_t k = 0; k < a.rows.size(); ++k) {
    CHECK(a.rows[k].exact_value == b.rows[k].exact_value);
    CHECK(a.rows[k].stability == b.rows[k].stability);
    CHECK(a.rows[k].mc_return == b.rows[k].mc_return);
  }
}

TEST_CASE("MDRR only moves on retraining rounds") {
  TrainConfig c = expfam(Algorithm::Mdrr, 12);
  RunRecord rec = run(c);
  for (const auto& row : rec.rows)
    if ((row.iteration + 1) % c.delay != 0) CHECK(row.stability == 0.0);
}

TEST_CASE("count-based table estimates") {
  TabularTables fallback = TabularTables::zeros(2, 2);
  fallback.transition.setConstant(0.5);
  fallback.reward.setConstant(-9.0);
  Trajectory tr{{0, 1, 1, 1.0}, {1, 0, 0, 2.0}, {0, 1, 0, 3.0}};
  TabularTables t = estimate_tables({tr}, fallback);
  CHECK(t.p(0, 1, 0) == 0.5);
  CHECK(t.p(0, 1, 1) == 0.5);
  CHECK(t.reward(0, 1) == 2.0);
  CHECK(t.p(1, 0, 0) == 1.0);
  CHECK(t.reward(1, 1) == -9.0);  // unvisited
}

TEST_CASE("loan protocol records equilibrium quantities") {
  TrainConfig c;
  c.algorithm = Algorithm::LoanPepg;
  c.env.kind = EnvKind::Loan;
  c.iterations = 30;
  c.trajectories = 200;
  c.seed = 1;
  RunRecord rec = run(c);
  REQUIRE(rec.rows.size() == 30);
  for (const auto& row : rec.rows) {
    CHECK(std::isfinite(row.exact_value));
    CHECK(row.stability >= 0.0);
  }
  CHECK(rec.summary.at("equilibrium_converged") == 1.0);
  CHECK(rec.summary.at("utility_perf") >= rec.summary.at("utility_erm"));
}

TEST_CASE("sweep matches serial runs and records failures") {
  TrainConfig good = expfam(Algorithm::Pepg, 5);
  TrainConfig bad = good;
  bad.algorithm = Algorithm::LoanReinforce;  // wrong env
  auto serial = sweep({good, bad}, {1, 2, 3}, 1);
  auto threaded = sweep({good, bad}, {1, 2, 3}, 3);
  REQUIRE(serial.size() == 2);
  CHECK(serial[0].failures.empty());
  CHECK(serial[1].failures.size() == 3);
  REQUIRE(serial[0].runs.size() == 3);
  for (int i = 0; i < 3; ++i) CHECK(run_csv(serial[0].runs[i]) == run_csv(threaded[0].runs[i]));
  REQUIRE(serial[0].exact_value.size() == 5);
  double mean = 0;
  for (const auto& r : serial[0].runs) mean += r.rows[4].exact_value / 3;
  CHECK(serial[0].exact_value[4].mean == doctest::Approx(mean));
}

TEST_CASE("gridworld runs with analytic environment gradients") {
  TrainConfig c;
  c.algorithm = Algorithm::Pepg;
  c.env.kind = EnvKind::Gridworld;
  c.env.grid.layout = {"S..H", ".H..", "...H", "H..G"};
  c.iterations = 4;
  c.trajectories = 10;
  RunRecord rec = run(c);
  CHECK(rec.rows.size() == 4);
  CHECK(rec.rows[3].grad_norm > 0.0);
  TrainConfig fd = c;
  fd.provider_from_env = false;
  fd.provider.kind = GradProvider::FiniteDifference;
  RunRecord rec_fd = run(fd);
  CHECK((rec.final_theta - rec_fd.final_theta).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("loan: the performative learner ends with higher equilibrium utility") {
  TrainConfig c;
  c.env.kind = EnvKind::Loan;
  c.eta = 0.5;
  c.iterations = 300;
  c.trajectories = 1000;
  for (std::uint64_t seed : {0, 1}) {
    c.seed = seed;
    c.algorithm = Algorithm::LoanPepg;
    RunRecord perf = run(c);
    c.algorithm = Algorithm::LoanReinforce;
    RunRecord erm = run(c);
    CHECK(perf.summary.at("utility_learned") > erm.summary.at("utility_learned") + 0.1);
  }
  // without performativity both learners take identical steps
  c.env.loan.beta = 0.0;
  c.algorithm = Algorithm::LoanPepg;
  Matrix a = run(c).final_theta;
  c.algorithm = Algorithm::LoanReinforce;
  CHECK(a == run(c).final_theta);
}
