#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "pepg/envs.hpp"
#include "pepg/gradients.hpp"
#include "pepg/gridworld.hpp"
#include "pepg/loan.hpp"

namespace pepg {

enum class Algorithm { Pepg, PepgReg, VanillaPg, RepeatedRetraining, Mdrr, LoanReinforce, LoanPepg };
Algorithm parse_algorithm(const std::string& name);
std::string to_string(Algorithm a);

enum class EnvKind { ExpFamily, Gridworld, Static, Loan };

struct EnvSpec {
  EnvKind kind = EnvKind::ExpFamily;
  ExpFamilyConfig expfam;
  GridworldConfig grid;
  LoanConfig loan;
  // static env: one state per reward row
  std::vector<std::vector<double>> static_rewards;
  double static_gamma = 0.9;
};

std::unique_ptr<PerformativeEnv> make_env(const EnvSpec& spec, std::uint64_t seed);

struct TrainConfig {
  Algorithm algorithm = Algorithm::Pepg;
  EnvSpec env;
  double eta = 0.1;
  bool eta_from_smoothness = false;  // eta = 1/L (exponential family only)
  double lambda = 2.0;               // used by pepg-reg
  int trajectories = 100;
  int horizon = 0;                   // 0: truncation_horizon(gamma, r_max, tail_eps)
  double tail_eps = 1e-4;
  int iterations = 1000;
  std::uint64_t seed = 0;
  ProviderOptions provider{GradProvider::Analytic, 64, 1e-5, 0};
  bool provider_from_env = true;     // analytic when available, else finite difference
  bool discount_weights = true;
  bool exact_gradient = false;       // debug: exact gradient instead of the sample estimate
  double initial_epsilon = 0.5;      // baselines: mix toward shortest path (gridworld)
  double lambda_base = 0.1;
  double memory_weight = 1.1;
  int delay = 3;
  int memory = 10;
  bool mdrr_exact_estimates = false;
  bool record_wall_time = false;     // wall_ms is 0 unless set, keeping CSVs reproducible

  double effective_lambda() const;
  void validate() const;
};

struct RunRow {
  int iteration = 0;
  double mc_return = 0.0;
  double mc_stderr = 0.0;
  double exact_value = 0.0;
  double stability = 0.0;
  double grad_norm = 0.0;
  double wall_ms = 0.0;
};

struct RunRecord {
  std::string algo;
  std::uint64_t seed = 0;
  std::vector<RunRow> rows;
  std::map<std::string, double> summary;
  Matrix final_theta;
  bool aborted = false;
  std::string abort_reason;
};

RunRecord run_pepg(const TrainConfig& config);
RunRecord run_vanilla_pg(const TrainConfig& config);
RunRecord run_repeated_retraining(const TrainConfig& config);
RunRecord run_mdrr(const TrainConfig& config);
RunRecord run_loan_protocol(const TrainConfig& config);
RunRecord run(const TrainConfig& config);

// Maximum-likelihood tables from sampled transitions; unvisited pairs use `fallback`.
TabularTables estimate_tables(const std::vector<Trajectory>& trajs, const TabularTables& fallback);

struct AggregateRow {
  int iteration = 0;
  double mean = 0.0;
  double stderr_ = 0.0;
};

struct SweepEntry {
  TrainConfig config;
  std::vector<RunRecord> runs;
  std::vector<AggregateRow> exact_value;
  std::vector<AggregateRow> mc_return;
  std::vector<std::string> failures;
};

std::vector<SweepEntry> sweep(const std::vector<TrainConfig>& configs,
                              const std::vector<std::uint64_t>& seeds, int jobs = 1);

}  // namespace pepg
