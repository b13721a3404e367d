#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pepg/envs.hpp"

namespace pepg {

struct Step {
  int s = 0;
  int a = 0;
  int next = 0;
  double r = 0.0;
};
using Trajectory = std::vector<Step>;

// T = ceil(log(eps_tail (1 - gamma) / r_max) / log gamma), at least 1.
int truncation_horizon(double gamma, double r_max, double eps_tail = 1e-4);

// Trajectory i uses Rng(seed).split(i), so results do not depend on batching.
std::vector<Trajectory> collect_trajectories(const TabularTables& tables,
                                             const StochasticPolicy& policy, const Vector& rho,
                                             int count, int horizon, std::uint64_t seed);

// Rewards replaced by r - lambda log pi(a|s).
std::vector<Trajectory> soften(std::vector<Trajectory> trajs, const StochasticPolicy& policy,
                               double lambda);

std::vector<double> reward_to_go(const Trajectory& traj, double gamma);
double discounted_return(const Trajectory& traj, double gamma);

// Per-state mean reward-to-go over all visits; unvisited states keep `previous`.
Vector fit_value(const std::vector<Trajectory>& trajs, const Vector& previous, double gamma);

struct GradientEstimate {
  Matrix grad;        // S x A
  Matrix std_error;   // across trajectories
  double policy_term_norm = 0.0;
  double transition_term_norm = 0.0;
  double reward_term_norm = 0.0;
};

struct EstimatorOptions {
  double lambda = 0.0;
  bool discount_weights = true;  // gamma^t weights inside the sum
  double advantage_bias = 0.0;   // test hook, added to every advantage
};

// Sample estimate of the performative gradient. `trajs` must already carry
// soft rewards when lambda > 0. env_grads == nullptr drops the environment terms.
GradientEstimate pepg_gradient(const StochasticPolicy& policy,
                               const std::vector<Trajectory>& trajs, const Vector& value_baseline,
                               const EnvGradients* env_grads, double gamma,
                               const EstimatorOptions& options = {});

// Exact performative value at rho; soft value when lambda > 0.
double exact_value(const PerformativeEnv& env, const PolicyParams& params, double lambda = 0.0);

// Central differences of exact_value in every coordinate.
Matrix exact_gradient_fd(const PerformativeEnv& env, const PolicyParams& params,
                         double lambda = 0.0, double h = 1e-5);

// Occupancy-weighted expectation form of the performative gradient.
Matrix exact_gradient_occupancy(const PerformativeEnv& env, const PolicyParams& params,
                                const EnvGradients& env_grads, double lambda = 0.0);

enum class GradProvider { Analytic, FiniteDifference, Directional, Zero };
GradProvider parse_grad_provider(const std::string& name);
std::string to_string(GradProvider p);

struct ProviderOptions {
  GradProvider kind = GradProvider::Analytic;
  int directions = 64;
  double h = 1e-5;
  std::uint64_t seed = 0;
};

EnvGradients env_grad_fd(const PerformativeEnv& env, const PolicyParams& params, double h = 1e-5);
EnvGradients env_grad_directional(const PerformativeEnv& env, const PolicyParams& params,
                                  int directions, std::uint64_t seed, double h = 1e-5);
EnvGradients env_gradients(const PerformativeEnv& env, const PolicyParams& params,
                           const ProviderOptions& options);

}  // namespace pepg
