#include "pepg/gridworld.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <limits>

namespace pepg {

namespace {

constexpr Cell kCellTypes[4] = {Cell::Blank, Cell::Start, Cell::Goal, Cell::Hazard};

bool is_goal(const GridLayout& g, int s) { return g.cell(s) == Cell::Goal; }

// follower action b: 0 no-op, 1..4 move b-1
int effective_move(int principal_dir, int follower_action) {
  return follower_action == 0 ? principal_dir : follower_action - 1;
}

void check_config(const GridworldConfig& c) {
  if (c.followers < 1) throw InvalidInput("followers must be >= 1");
  if (!(c.match_prob >= 0.0 && c.match_prob <= 1.0)) throw InvalidInput("match_prob outside [0, 1]");
  if (!(c.boltzmann >= 0.0)) throw InvalidInput("boltzmann temperature must be >= 0");
  if (!(c.gamma > 0.0 && c.gamma < 1.0)) throw InvalidInput("gamma must lie in (0, 1)");
}

// Follower MDP under the principal policy, in the follower's perceived grid.
TabularTables follower_tables(const GridworldConfig& cfg, const GridLayout& grid,
                              const StochasticPolicy& principal) {
  const int S = grid.n_states();
  TabularTables t = TabularTables::zeros(S, kFollowerActions);
  for (int s = 0; s < S; ++s) {
    if (is_goal(grid, s)) {
      for (int b = 0; b < kFollowerActions; ++b) t.transition(t.row(s, b), s) = 1.0;
      continue;
    }
    for (int a = 0; a < kPrincipalActions; ++a) {
      double p = principal.probs(s, a);
      int dest = grid.move(s, a);
      t.transition(t.row(s, 0), dest) += p;
      t.reward(s, 0) += p * grid.cost(dest, cfg);
    }
    for (int b = 1; b < kFollowerActions; ++b) {
      int dest = grid.move(s, b - 1);
      t.transition(t.row(s, b), dest) = 1.0;
      t.reward(s, b) = grid.cost(dest, cfg) + cfg.intervention_cost;
    }
  }
  return t;
}

}  // namespace

std::vector<std::string> GridworldConfig::default_layout() {
  return {"S...H...", ".H...H..", "...H....", ".H....H.",
          "....H...", ".HH...H.", "....H...", "..H....G"};
}

std::vector<std::string> GridworldConfig::load_layout(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open grid layout file: " + path);
  std::vector<std::string> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    rows.push_back(line);
  }
  GridLayout check(rows);
  return rows;
}

GridLayout::GridLayout(const std::vector<std::string>& rows) {
  if (rows.empty()) throw InvalidInput("empty grid layout");
  rows_ = static_cast<int>(rows.size());
  cols_ = static_cast<int>(rows[0].size());
  if (cols_ == 0) throw InvalidInput("empty grid row");
  for (const auto& r : rows) {
    if (static_cast<int>(r.size()) != cols_) throw InvalidInput("ragged grid layout");
    for (char ch : r) {
      if (ch != '.' && ch != 'S' && ch != 'G' && ch != 'H')
        throw InvalidInput(std::string("unknown grid cell '") + ch + "'");
      cells_.push_back(static_cast<Cell>(ch));
    }
  }
  if (starts().empty()) throw InvalidInput("grid layout has no start cell");
}

int GridLayout::move(int s, int dir) const {
  int r = s / cols_, c = s % cols_;
  switch (dir) {
    case 0: r = std::max(r - 1, 0); break;
    case 1: r = std::min(r + 1, rows_ - 1); break;
    case 2: c = std::max(c - 1, 0); break;
    case 3: c = std::min(c + 1, cols_ - 1); break;
    default: throw InvalidInput("bad move direction");
  }
  return r * cols_ + c;
}

std::vector<int> GridLayout::starts() const {
  std::vector<int> out;
  for (int s = 0; s < n_states(); ++s)
    if (cells_[s] == Cell::Start) out.push_back(s);
  return out;
}

double GridLayout::cost(int s, const GridworldConfig& cfg) const {
  switch (cells_[s]) {
    case Cell::Goal: return cfg.cost_goal;
    case Cell::Hazard: return cfg.cost_hazard;
    default: return cfg.cost_blank;
  }
}

std::vector<GridLayout> sample_perturbed_layouts(const GridworldConfig& config, Rng& rng) {
  check_config(config);
  GridLayout truth(config.layout.empty() ? GridworldConfig::default_layout() : config.layout);
  std::vector<GridLayout> out;
  for (int j = 0; j < config.followers; ++j) {
    GridLayout g = truth;
    for (int s = 0; s < g.n_states(); ++s) {
      double keep = rng.uniform();
      int pick = rng.uniform_int(4);
      if (keep >= config.match_prob) g.set_cell(s, kCellTypes[pick]);
    }
    out.push_back(std::move(g));
  }
  return out;
}

StochasticPolicy follower_response(const GridworldConfig& config,
                                   const std::vector<GridLayout>& perceived,
                                   const StochasticPolicy& principal) {
  check_config(config);
  if (perceived.empty()) throw InvalidInput("no follower grids");
  const int S = perceived[0].n_states();
  if (principal.n_states() != S || principal.n_actions() != kPrincipalActions)
    throw InvalidInput("principal policy shape does not match grid");
  Matrix q = Matrix::Zero(S, kFollowerActions);
  for (const auto& grid : perceived) {
    SoftOptimum opt = solve_soft_optimal(follower_tables(config, grid, principal), config.gamma,
                                         0.0, 1e-13, 1000);
    if (!opt.converged) throw std::runtime_error("follower policy iteration did not converge");
    q += opt.q;
  }
  q /= static_cast<double>(perceived.size());
  StochasticPolicy pi;
  pi.probs.resize(S, kFollowerActions);
  for (int s = 0; s < S; ++s) {
    Eigen::RowVectorXd z = config.boltzmann * (q.row(s).array() - q.row(s).maxCoeff());
    Eigen::RowVectorXd e = z.array().exp();
    pi.probs.row(s) = e / e.sum();
  }
  return pi;
}

StochasticPolicy gridworld_follower_response(const GridworldConfig& config,
                                             const StochasticPolicy& principal, Rng& rng) {
  return follower_response(config, sample_perturbed_layouts(config, rng), principal);
}

TabularTables compose_tables(const GridworldConfig& config, const GridLayout& truth,
                             const StochasticPolicy& follower) {
  const int S = truth.n_states();
  if (follower.n_states() != S || follower.n_actions() != kFollowerActions)
    throw InvalidInput("follower policy shape does not match grid");
  TabularTables t = TabularTables::zeros(S, kPrincipalActions);
  for (int s = 0; s < S; ++s) {
    if (is_goal(truth, s)) {
      for (int a = 0; a < kPrincipalActions; ++a) t.transition(t.row(s, a), s) = 1.0;
      continue;
    }
    for (int a = 0; a < kPrincipalActions; ++a) {
      for (int b = 0; b < kFollowerActions; ++b) {
        double p = follower.probs(s, b);
        int dest = truth.move(s, effective_move(a, b));
        t.transition(t.row(s, a), dest) += p;
        t.reward(s, a) += p * truth.cost(dest, config);
      }
      t.reward(s, a) += config.intervention_cost * (1.0 - follower.probs(s, 0));
    }
  }
  return t;
}

TabularTables raw_grid_tables(const GridworldConfig& config) {
  GridLayout truth(config.layout.empty() ? GridworldConfig::default_layout() : config.layout);
  StochasticPolicy noop;
  noop.probs = Matrix::Zero(truth.n_states(), kFollowerActions);
  noop.probs.col(0).setOnes();
  return compose_tables(config, truth, noop);
}

TabularTables gridworld_induce(const GridworldConfig& config, const PolicyParams& params,
                               Rng& rng) {
  GridLayout truth(config.layout.empty() ? GridworldConfig::default_layout() : config.layout);
  if (params.n_states() != truth.n_states() || params.n_actions() != kPrincipalActions)
    throw InvalidInput("parameter shape does not match grid");
  StochasticPolicy follower =
      follower_response(config, sample_perturbed_layouts(config, rng), softmax(params));
  return compose_tables(config, truth, follower);
}

GridworldEnv::GridworldEnv(GridworldConfig config, std::uint64_t seed)
    : cfg_(std::move(config)),
      truth_(cfg_.layout.empty() ? GridworldConfig::default_layout() : cfg_.layout) {
  check_config(cfg_);
  Rng rng(seed);
  perceived_ = sample_perturbed_layouts(cfg_, rng);
  rho_ = Vector::Zero(truth_.n_states());
  auto starts = truth_.starts();
  for (int s : starts) rho_(s) = 1.0 / starts.size();
}

double GridworldEnv::r_max() const {
  return std::max({std::abs(cfg_.cost_blank), std::abs(cfg_.cost_goal),
                   std::abs(cfg_.cost_hazard)}) +
         std::abs(cfg_.intervention_cost);
}

TabularTables GridworldEnv::induce(const PolicyParams& params) const {
  if (params.n_states() != truth_.n_states() || params.n_actions() != kPrincipalActions)
    throw InvalidInput("parameter shape does not match grid");
  return compose_tables(cfg_, truth_, follower_response(cfg_, perceived_, softmax(params)));
}

EnvGradients GridworldEnv::analytic_gradients(const PolicyParams& params) const {
  const int S = truth_.n_states(), A = kPrincipalActions, B = kFollowerActions;
  if (params.n_states() != S || params.n_actions() != A)
    throw InvalidInput("parameter shape does not match grid");
  const double g = cfg_.gamma;
  const StochasticPolicy pi = softmax(params);
  const int dim = S * A;

  // averaged follower Q and its derivative, rows s*B + b
  Matrix q = Matrix::Zero(S, B);
  Matrix dq = Matrix::Zero(S * B, dim);
  for (const auto& grid : perceived_) {
    TabularTables ft = follower_tables(cfg_, grid, pi);
    SoftOptimum opt = solve_soft_optimal(ft, g, 0.0, 1e-13, 1000);
    if (!opt.converged) throw std::runtime_error("follower policy iteration did not converge");
    q += opt.q;
    Matrix resolvent =
        (Matrix::Identity(S, S) - g * state_transition(ft, opt.policy)).partialPivLu().inverse();
    for (int x = 0; x < S; ++x) {
      if (is_goal(grid, x)) continue;
      // Q response to a unit change in the no-op row value at x
      Vector resp = g * ft.transition * (resolvent.col(x) * opt.policy.probs(x, 0));
      resp(ft.row(x, 0)) += 1.0;
      double step[kPrincipalActions], mean = 0.0;
      for (int a = 0; a < A; ++a) {
        int dest = grid.move(x, a);
        step[a] = grid.cost(dest, cfg_) + g * opt.value(dest);
        mean += pi.probs(x, a) * step[a];
      }
      for (int a = 0; a < A; ++a)
        dq.col(param_index(S, x, a)) += pi.probs(x, a) * (step[a] - mean) * resp;
    }
  }
  q /= double(perceived_.size());
  dq /= double(perceived_.size());

  // Boltzmann response
  Matrix follower(S, B);
  Matrix dfollow(S * B, dim);
  for (int s = 0; s < S; ++s) {
    Eigen::RowVectorXd e = (cfg_.boltzmann * (q.row(s).array() - q.row(s).maxCoeff())).exp();
    follower.row(s) = e / e.sum();
    Eigen::RowVectorXd avg = Eigen::RowVectorXd::Zero(dim);
    for (int b = 0; b < B; ++b) avg += follower(s, b) * dq.row(s * B + b);
    for (int b = 0; b < B; ++b)
      dfollow.row(s * B + b) = cfg_.boltzmann * follower(s, b) * (dq.row(s * B + b) - avg);
  }

  EnvGradients out = EnvGradients::zeros(S, A);
  out.dlog_p = Matrix::Zero(S * A * S, dim);
  out.dr = Matrix::Zero(S * A, dim);
  for (int s = 0; s < S; ++s) {
    if (is_goal(truth_, s)) continue;
    for (int a = 0; a < A; ++a) {
      std::vector<double> prob(S, 0.0);
      for (int b = 0; b < B; ++b) prob[truth_.move(s, effective_move(a, b))] += follower(s, b);
      for (int b = 0; b < B; ++b) {
        int dest = truth_.move(s, effective_move(a, b));
        out.dlog_p.row(out.p_row(s, a, dest)) += dfollow.row(s * B + b) / prob[dest];
        out.dr.row(s * A + a) += truth_.cost(dest, cfg_) * dfollow.row(s * B + b);
      }
      out.dr.row(s * A + a) -= cfg_.intervention_cost * dfollow.row(s * B);
      for (int n = 0; n < S; ++n) out.zero_prob_entries += prob[n] == 0.0;
    }
  }
  for (int s = 0; s < S; ++s)
    if (is_goal(truth_, s))
      out.zero_prob_entries += A * (S - 1);
  return out;
}

StochasticPolicy GridworldEnv::shortest_path_policy(double epsilon) const {
  const int S = truth_.n_states();
  std::vector<int> dist(S, std::numeric_limits<int>::max());
  std::deque<int> queue;
  for (int s = 0; s < S; ++s)
    if (is_goal(truth_, s)) {
      dist[s] = 0;
      queue.push_back(s);
    }
  // moves are symmetric on an open grid, so BFS from the goal gives distances to it
  while (!queue.empty()) {
    int s = queue.front();
    queue.pop_front();
    for (int dir = 0; dir < 4; ++dir) {
      int n = truth_.move(s, dir);
      if (dist[n] == std::numeric_limits<int>::max()) {
        dist[n] = dist[s] + 1;
        queue.push_back(n);
      }
    }
  }
  StochasticPolicy pi;
  pi.probs = Matrix::Constant(S, kPrincipalActions, epsilon / kPrincipalActions);
  for (int s = 0; s < S; ++s) {
    int best = 0;
    for (int dir = 1; dir < 4; ++dir)
      if (dist[truth_.move(s, dir)] < dist[truth_.move(s, best)]) best = dir;
    pi.probs(s, best) += 1.0 - epsilon;
  }
  return pi;
}

}  // namespace pepg
