#pragma once

#include <string>
#include <vector>

#include "pepg/envs.hpp"
#include "pepg/rng.hpp"

namespace pepg {

enum class Cell : char { Blank = '.', Start = 'S', Goal = 'G', Hazard = 'H' };

struct GridworldConfig {
  std::vector<std::string> layout;  // rows of {., S, G, H}; empty: built-in 8x8 map
  double cost_blank = -0.01;
  double cost_goal = -0.02;
  double cost_hazard = -0.5;
  double intervention_cost = -0.05;
  int followers = 1;
  double match_prob = 0.7;
  double boltzmann = 5.0;
  double gamma = 0.9;

  static std::vector<std::string> default_layout();
  static std::vector<std::string> load_layout(const std::string& path);
};

// Principal actions: up, down, left, right. Follower actions: no-op then the same four.
constexpr int kPrincipalActions = 4;
constexpr int kFollowerActions = 5;

class GridLayout {
 public:
  explicit GridLayout(const std::vector<std::string>& rows);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  int n_states() const { return rows_ * cols_; }
  Cell cell(int s) const { return cells_[s]; }
  void set_cell(int s, Cell c) { cells_[s] = c; }
  // destination of a directional move (0 up, 1 down, 2 left, 3 right), clamped at walls
  int move(int s, int dir) const;
  std::vector<int> starts() const;
  double cost(int s, const GridworldConfig& cfg) const;

 private:
  int rows_ = 0, cols_ = 0;
  std::vector<Cell> cells_;
};

// Each cell kept with probability match_prob, else resampled uniformly over the four types.
std::vector<GridLayout> sample_perturbed_layouts(const GridworldConfig& config, Rng& rng);

// Follower Boltzmann policy (S x 5) against the principal policy, averaging
// the optimal Q-functions of the perturbed follower MDPs.
StochasticPolicy follower_response(const GridworldConfig& config,
                                   const std::vector<GridLayout>& perceived,
                                   const StochasticPolicy& principal);
StochasticPolicy gridworld_follower_response(const GridworldConfig& config,
                                             const StochasticPolicy& principal, Rng& rng);

// Principal tables given the follower policy.
TabularTables compose_tables(const GridworldConfig& config, const GridLayout& truth,
                             const StochasticPolicy& follower);
TabularTables raw_grid_tables(const GridworldConfig& config);

TabularTables gridworld_induce(const GridworldConfig& config, const PolicyParams& params, Rng& rng);

class GridworldEnv : public PerformativeEnv {
 public:
  GridworldEnv(GridworldConfig config, std::uint64_t seed);

  int n_states() const override { return truth_.n_states(); }
  int n_actions() const override { return kPrincipalActions; }
  double gamma() const override { return cfg_.gamma; }
  double r_max() const override;
  const Vector& rho() const override { return rho_; }
  TabularTables induce(const PolicyParams& params) const override;
  // Envelope-theorem derivative of the follower's optimal Q (greedy policy held
  // fixed), chained through the Boltzmann response. Exact where the greedy
  // follower action is unique in every state.
  bool has_analytic_gradients() const override { return true; }
  EnvGradients analytic_gradients(const PolicyParams& params) const override;
  std::string name() const override { return "gridworld"; }
  TabularTables prior_tables() const override { return raw_grid_tables(cfg_); }

  const GridworldConfig& config() const { return cfg_; }
  const GridLayout& layout() const { return truth_; }
  const std::vector<GridLayout>& perceived() const { return perceived_; }

  // BFS shortest-path action per state, mixed with uniform at rate epsilon.
  StochasticPolicy shortest_path_policy(double epsilon) const;

 private:
  GridworldConfig cfg_;
  GridLayout truth_;
  std::vector<GridLayout> perceived_;
  Vector rho_;
};

}  // namespace pepg
