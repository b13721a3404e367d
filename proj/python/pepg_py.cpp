#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "pepg/experiment.hpp"
#include "pepg/io.hpp"
#include "pepg/loan.hpp"
#include "pepg/trainers.hpp"
#include "pepg/verify.hpp"

namespace py = pybind11;
using namespace pepg;

namespace {

PolicyParams params_of(const Matrix& theta) { return PolicyParams{theta}; }

py::dict report_dict(const LemmaReport& r) {
  py::dict d;
  d["lemma"] = r.lemma;
  d["instance"] = r.instance;
  d["equality"] = r.equality;
  d["lhs"] = r.lhs;
  d["rhs"] = r.rhs;
  d["residual"] = r.residual;
  d["tolerance"] = r.tolerance;
  d["pass"] = r.pass;
  d["inconclusive"] = r.inconclusive;
  d["note"] = r.note;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Performative policy gradient core";

  py::register_exception<InvalidInput>(m, "InvalidInput", PyExc_ValueError);
  py::register_exception<SpecError>(m, "SpecError", PyExc_ValueError);

  py::class_<ExpFamilyEnv>(m, "ExpFamilyEnv")
      .def(py::init([](int states, int actions, double gamma, double r_max, double xi,
                       std::vector<double> psi, std::vector<double> rho) {
             ExpFamilyConfig c;
             c.n_states = states;
             c.n_actions = actions;
             c.gamma = gamma;
             c.r_max = r_max;
             c.xi = xi;
             c.psi = std::move(psi);
             c.rho = std::move(rho);
             return ExpFamilyEnv(c);
           }),
           py::arg("states"), py::arg("actions"), py::arg("gamma") = 0.9, py::arg("r_max") = 1.0,
           py::arg("xi") = 0.5, py::arg("psi") = std::vector<double>{},
           py::arg("rho") = std::vector<double>{})
      .def_property_readonly("n_states", &ExpFamilyEnv::n_states)
      .def_property_readonly("n_actions", &ExpFamilyEnv::n_actions)
      .def_property_readonly("gamma", &ExpFamilyEnv::gamma);

  m.def("softmax", [](const Matrix& theta) { return softmax(params_of(theta)).probs; },
        py::arg("theta"));

  m.def(
      "induce",
      [](const ExpFamilyEnv& env, const Matrix& theta) {
        TabularTables t = env.induce(params_of(theta));
        return py::make_tuple(t.transition, t.reward);
      },
      py::arg("env"), py::arg("theta"),
      "Returns (transition (S*A x S), reward (S x A)) deployed under theta.");

  m.def(
      "exact_value",
      [](const ExpFamilyEnv& env, const Matrix& theta, double lambda) {
        return exact_value(env, params_of(theta), lambda);
      },
      py::arg("env"), py::arg("theta"), py::arg("lam") = 0.0);

  m.def(
      "exact_gradient",
      [](const ExpFamilyEnv& env, const Matrix& theta, double lambda) {
        PolicyParams p = params_of(theta);
        return exact_gradient_occupancy(env, p, env.analytic_gradients(p), lambda);
      },
      py::arg("env"), py::arg("theta"), py::arg("lam") = 0.0);

  m.def(
      "run_spec",
      [](const std::string& spec_json, std::uint64_t seed) {
        ExperimentSpec spec = parse_spec(nlohmann::json::parse(spec_json));
        std::vector<TrainConfig> configs = spec.expand();
        std::vector<std::string> labels = spec.labels();
        py::list out;
        for (size_t i = 0; i < configs.size(); ++i) {
          TrainConfig c = configs[i];
          c.seed = seed;
          RunRecord rec;
          {
            py::gil_scoped_release release;
            rec = run(c);
          }
          rec.algo = labels[i];
          py::dict d;
          d["algo"] = rec.algo;
          d["seed"] = rec.seed;
          d["csv"] = run_csv(rec);
          d["aborted"] = rec.aborted;
          d["final_theta"] = rec.final_theta;
          d["summary"] = rec.summary;
          out.append(d);
        }
        return out;
      },
      py::arg("spec_json"), py::arg("seed") = 0,
      "Runs every algorithm of a JSON spec for one seed; returns one dict per run.");

  m.def(
      "verify",
      [](const std::string& suite, std::uint64_t seed, int instances) {
        std::vector<LemmaReport> reports;
        {
          py::gil_scoped_release release;
          SuiteOptions so;
          so.seed = seed;
          so.instances = instances;
          if (suite == "identities") reports = run_identity_suite(so);
          else if (suite == "inequalities") reports = run_inequality_suite(so);
          else if (suite == "ascent") reports = run_ascent_suite(seed, instances);
          else throw InvalidInput("unknown suite " + suite);
        }
        py::list out;
        for (const auto& r : reports) out.append(report_dict(r));
        return out;
      },
      py::arg("suite") = "identities", py::arg("seed") = 0, py::arg("instances") = 50);

  m.def(
      "loan_equilibrium",
      [](double theta, double beta) {
        LoanConfig c;
        c.beta = beta;
        LoanEquilibrium eq = loan_equilibrium_mean(c, theta);
        return py::make_tuple(eq.mu, loan_equilibrium_utility(c, theta));
      },
      py::arg("theta"), py::arg("beta") = 0.5, "Returns (mu*, utility at mu*) for the default loan model.");

  m.def(
      "loan_optima",
      [](double beta) {
        LoanConfig c;
        c.beta = beta;
        LoanOptimum erm = loan_erm_optimum(c), perf = loan_performative_optimum(c);
        py::dict d;
        d["erm_theta"] = erm.theta;
        d["erm_utility"] = erm.utility;
        d["perf_theta"] = perf.theta;
        d["perf_utility"] = perf.utility;
        return d;
      },
      py::arg("beta") = 0.5);

  m.def("csv_header", []() { return std::string(kCsvHeader); });
}
