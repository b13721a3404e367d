#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "pepg/core_mdp.hpp"
#include "pepg/policy.hpp"

namespace pepg {

// Derivatives of the induced tables with respect to the flattened policy
// parameters (column index = param_index(s, a)).
struct EnvGradients {
  int n_states = 0;
  int n_actions = 0;
  Matrix dlog_p;  // (S*A*S) x dim, row (s*A + a)*S + next
  Matrix dr;      // (S*A) x dim
  int zero_prob_entries = 0;  // transitions with P == 0, derivative set to zero

  static EnvGradients zeros(int n_states, int n_actions);
  int dim() const { return n_states * n_actions; }
  int p_row(int s, int a, int next) const { return (s * n_actions + a) * n_states + next; }
};

class PerformativeEnv {
 public:
  virtual ~PerformativeEnv() = default;

  virtual int n_states() const = 0;
  virtual int n_actions() const = 0;
  virtual double gamma() const = 0;
  virtual double r_max() const = 0;
  virtual const Vector& rho() const = 0;
  virtual TabularTables induce(const PolicyParams& params) const = 0;
  virtual bool has_analytic_gradients() const { return false; }
  virtual EnvGradients analytic_gradients(const PolicyParams& params) const;
  virtual std::string name() const = 0;
  // Model assumed for state-action pairs never observed; uniform moves, zero reward.
  virtual TabularTables prior_tables() const;
};

struct ExpFamilyConfig {
  int n_states = 2;
  int n_actions = 2;
  double gamma = 0.9;
  double r_max = 1.0;
  double xi = 0.5;
  std::vector<double> psi;  // empty: psi_max * (i + 1) / S
  std::vector<double> rho;  // empty: uniform

  double psi_max() const;   // max of the resolved psi
  static double default_psi_max(double gamma) { return (1.0 - gamma) / gamma; }
};

// P(s'' | s, a) = softmax over s'' of theta(s'', a) psi(s'') (independent of s),
// r(s, a) = clip(xi theta(s, a), -r_max, r_max).
class ExpFamilyEnv : public PerformativeEnv {
 public:
  explicit ExpFamilyEnv(ExpFamilyConfig config);

  int n_states() const override { return cfg_.n_states; }
  int n_actions() const override { return cfg_.n_actions; }
  double gamma() const override { return cfg_.gamma; }
  double r_max() const override { return cfg_.r_max; }
  const Vector& rho() const override { return rho_; }
  TabularTables induce(const PolicyParams& params) const override;
  bool has_analytic_gradients() const override { return true; }
  EnvGradients analytic_gradients(const PolicyParams& params) const override;
  std::string name() const override { return "expfam"; }

  const ExpFamilyConfig& config() const { return cfg_; }
  const Vector& psi() const { return psi_; }

 private:
  ExpFamilyConfig cfg_;
  Vector psi_;
  Vector rho_;
};

// Environment that ignores the policy.
class StaticEnv : public PerformativeEnv {
 public:
  StaticEnv(TabularTables tables, double gamma, Vector rho, double r_max = 1.0);

  int n_states() const override { return tables_.n_states; }
  int n_actions() const override { return tables_.n_actions; }
  double gamma() const override { return gamma_; }
  double r_max() const override { return r_max_; }
  const Vector& rho() const override { return rho_; }
  TabularTables induce(const PolicyParams&) const override { return tables_; }
  bool has_analytic_gradients() const override { return true; }
  EnvGradients analytic_gradients(const PolicyParams&) const override {
    return EnvGradients::zeros(tables_.n_states, tables_.n_actions);
  }
  std::string name() const override { return "static"; }

 private:
  TabularTables tables_;
  double gamma_;
  Vector rho_;
  double r_max_;
};

// Environment map given as a callable. Used by tests and bindings.
class FunctionEnv : public PerformativeEnv {
 public:
  using Map = std::function<TabularTables(const PolicyParams&)>;
  FunctionEnv(int n_states, int n_actions, double gamma, Vector rho, double r_max, Map map);

  int n_states() const override { return S_; }
  int n_actions() const override { return A_; }
  double gamma() const override { return gamma_; }
  double r_max() const override { return r_max_; }
  const Vector& rho() const override { return rho_; }
  TabularTables induce(const PolicyParams& params) const override { return map_(params); }
  std::string name() const override { return "function"; }

 private:
  int S_, A_;
  double gamma_;
  Vector rho_;
  double r_max_;
  Map map_;
};

// Free-function forms.
TabularTables expfam_induce(const ExpFamilyConfig& config, const PolicyParams& params);
EnvGradients expfam_analytic_grad(const ExpFamilyConfig& config, const PolicyParams& params);

}  // namespace pepg
