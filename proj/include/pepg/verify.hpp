#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pepg/envs.hpp"
#include "pepg/gradients.hpp"

namespace pepg {

struct LemmaReport {
  std::string lemma;
  std::string instance;
  bool equality = true;
  double lhs = 0.0;
  double rhs = 0.0;
  double residual = 0.0;  // |lhs - rhs| for equalities, rhs - lhs (slack) for inequalities
  double tolerance = 0.0;
  bool pass = false;
  bool inconclusive = false;
  std::string note;
};

LemmaReport equality_report(std::string lemma, std::string instance, double lhs, double rhs,
                            double tol);
LemmaReport inequality_report(std::string lemma, std::string instance, double lhs, double rhs,
                              double tol);

struct VerifyInstance {
  ExpFamilyConfig config;
  PolicyParams theta;
  PolicyParams theta_prime;
  std::string label;
};

// |S| in {2,3,4}, |A| in {2,3}, gamma in {0.5, 0.9}, r_max = 1, rho uniform.
VerifyInstance random_instance(std::uint64_t seed);

// Lemma 1, all three forms. residual = max over forms.
std::vector<LemmaReport> check_performance_difference(const PerformativeEnv& env,
                                                      const PolicyParams& theta,
                                                      const PolicyParams& theta_prime,
                                                      double tol = 1e-8,
                                                      double advantage_bias = 0.0);

// Occupancy form vs central differences of the exact value; max relative
// coordinate error with relative floor 1e-3.
LemmaReport check_gradient_theorem(const PerformativeEnv& env, const PolicyParams& theta,
                                   double lambda, double tol = 1e-5);

struct OptimalPolicyOracle {
  PolicyParams theta;
  double value = 0.0;
  int restarts = 0;
  int evaluations = 0;
  bool budget_exhausted = false;
  std::vector<double> probe_values;  // best value reached from each seed
};

OptimalPolicyOracle find_optimal_policy(const PerformativeEnv& env, double lambda, int restarts,
                                        int budget, std::uint64_t seed);

struct LipschitzEstimate {
  double reward = 0.0;
  double transition = 0.0;
};
// Max ratios ||r - r'||_1 / ||pi - pi'||_inf and ||P - P'||_1 / ||pi - pi'||_inf over
// random probe pairs plus the supplied pairs, inflated by `inflation`.
LipschitzEstimate estimate_lipschitz(const PerformativeEnv& env,
                                     const std::vector<std::pair<PolicyParams, PolicyParams>>& pairs,
                                     int probes, std::uint64_t seed, double inflation = 1.05);

double hellinger(const Eigen::RowVectorXd& p, const Eigen::RowVectorXd& q);

LemmaReport check_shift_bound(const PerformativeEnv& env, const PolicyParams& theta,
                              const OptimalPolicyOracle& oracle, const LipschitzEstimate& lip,
                              double tol = 1e-8);

// Exponential-family form: bias (r_max + lambda log|A|) / (1 - gamma).
LemmaReport check_gradient_domination(const PerformativeEnv& env, const PolicyParams& theta,
                                      const OptimalPolicyOracle& oracle, const Vector& nu,
                                      double lambda, double tol = 1e-8);
// Generic form with Lipschitz constants.
LemmaReport check_gradient_domination_generic(const PerformativeEnv& env,
                                              const PolicyParams& theta,
                                              const OptimalPolicyOracle& oracle,
                                              const Vector& nu, double lambda,
                                              const LipschitzEstimate& lip, double tol = 1e-8);

struct SmoothnessConstants {
  double beta1 = 0.0;
  double beta2 = 0.0;
  double value = 0.0;    // L
  double entropy = 0.0;  // beta_lambda
};
SmoothnessConstants expfam_smoothness(const ExpFamilyConfig& config);

// max over m random unit directions of |V(t+hu) - 2V(t) + V(t-hu)| / h^2.
double smoothness_probe(const PerformativeEnv& env, const PolicyParams& theta, int directions,
                        double h, double lambda, std::uint64_t seed);

LemmaReport check_smoothness(const ExpFamilyEnv& env, const PolicyParams& theta, double lambda,
                             int directions, std::uint64_t seed, double tol = 1e-8);

// Occupancy sums to one, zero-mean advantage, coverage >= 1, entropy <= log|A|,
// soft value within [-(r_max) , r_max + lambda log|A|] / (1 - gamma).
std::vector<LemmaReport> check_basic_invariants(const PerformativeEnv& env,
                                                const PolicyParams& theta,
                                                const PolicyParams& theta_prime, double lambda);

// Exact gradient ascent with step 1/L; slack = min per-step improvement.
LemmaReport check_monotone_ascent(const ExpFamilyEnv& env, const PolicyParams& theta0, int steps,
                                  double tol = 1e-9);

struct ConsistencyResult {
  Matrix estimate;
  Matrix exact;
  Matrix z;
  double max_abs_z = 0.0;
};
ConsistencyResult estimator_consistency(const PerformativeEnv& env, const PolicyParams& theta,
                                        double lambda, int trajectories, std::uint64_t seed);

// Same dynamics with a different start distribution.
class RestartedEnv : public PerformativeEnv {
 public:
  RestartedEnv(const PerformativeEnv& base, Vector start) : base_(base), start_(std::move(start)) {}
  int n_states() const override { return base_.n_states(); }
  int n_actions() const override { return base_.n_actions(); }
  double gamma() const override { return base_.gamma(); }
  double r_max() const override { return base_.r_max(); }
  const Vector& rho() const override { return start_; }
  TabularTables induce(const PolicyParams& p) const override { return base_.induce(p); }
  bool has_analytic_gradients() const override { return base_.has_analytic_gradients(); }
  EnvGradients analytic_gradients(const PolicyParams& p) const override {
    return base_.analytic_gradients(p);
  }
  std::string name() const override { return base_.name(); }

 private:
  const PerformativeEnv& base_;
  Vector start_;
};

struct SuiteOptions {
  std::uint64_t seed = 0;
  int instances = 50;
  double advantage_bias = 0.0;  // test hook
};
std::vector<LemmaReport> run_identity_suite(const SuiteOptions& options);
std::vector<LemmaReport> run_inequality_suite(const SuiteOptions& options);

// Fixed 2-state, 2-action instance used by the estimator consistency check.
VerifyInstance consistency_instance();
// One report per gradient coordinate at lambda 0 and 2, |z| <= 3.
std::vector<LemmaReport> run_consistency_suite(std::uint64_t seed, int trajectories = 200000);
// check_monotone_ascent on `instances` random instances.
std::vector<LemmaReport> run_ascent_suite(std::uint64_t seed, int instances = 10, int steps = 200);

}  // namespace pepg
