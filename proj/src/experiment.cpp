#include "pepg/experiment.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "pepg/io.hpp"

namespace pepg {

using nlohmann::json;

namespace {

// Reads keys from one JSON object and rejects any it did not consume.
class Section {
 public:
  Section(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw SpecError(path_.empty() ? "<root>" : path_, "expected an object");
  }

  std::string key(const std::string& k) const { return path_.empty() ? k : path_ + "." + k; }
  bool has(const std::string& k) {
    used_.insert(k);
    return obj_.contains(k);
  }
  const json& raw(const std::string& k) {
    used_.insert(k);
    return obj_.at(k);
  }

  double number(const std::string& k, double def) {
    if (!has(k)) return def;
    const json& v = obj_.at(k);
    if (!v.is_number()) throw SpecError(key(k), "expected a number");
    return v.get<double>();
  }
  int integer(const std::string& k, int def) {
    if (!has(k)) return def;
    const json& v = obj_.at(k);
    if (!v.is_number_integer()) throw SpecError(key(k), "expected an integer");
    return v.get<int>();
  }
  bool boolean(const std::string& k, bool def) {
    if (!has(k)) return def;
    const json& v = obj_.at(k);
    if (!v.is_boolean()) throw SpecError(key(k), "expected true or false");
    return v.get<bool>();
  }
  std::string string(const std::string& k, const std::string& def) {
    if (!has(k)) return def;
    const json& v = obj_.at(k);
    if (!v.is_string()) throw SpecError(key(k), "expected a string");
    return v.get<std::string>();
  }
  std::vector<double> numbers(const std::string& k) {
    if (!has(k)) return {};
    const json& v = obj_.at(k);
    if (!v.is_array()) throw SpecError(key(k), "expected an array of numbers");
    std::vector<double> out;
    for (const auto& x : v) {
      if (!x.is_number()) throw SpecError(key(k), "expected an array of numbers");
      out.push_back(x.get<double>());
    }
    return out;
  }

  void finish() const {
    for (auto it = obj_.begin(); it != obj_.end(); ++it)
      if (!used_.count(it.key())) throw SpecError(key(it.key()), "unknown key");
  }

 private:
  const json& obj_;
  std::string path_;
  std::set<std::string> used_;
};

void require(bool ok, const std::string& key, const std::string& message) {
  if (!ok) throw SpecError(key, message);
}

std::string resolve_layout(const std::string& path, const std::string& base_dir) {
  namespace fs = std::filesystem;
  fs::path p(path);
  if (p.is_absolute() || base_dir.empty() || fs::exists(p)) return path;
  fs::path base(base_dir);
  for (const fs::path& dir : {base, base.parent_path()}) {
    if (fs::exists(dir / p)) return (dir / p).string();
  }
  return path;
}

EnvSpec parse_env(const json& j, const std::string& base_dir) {
  Section sec(j, "env");
  EnvSpec env;
  std::string type = sec.string("type", "");
  if (type == "expfam") {
    env.kind = EnvKind::ExpFamily;
    ExpFamilyConfig& c = env.expfam;
    c.n_states = sec.integer("states", c.n_states);
    c.n_actions = sec.integer("actions", c.n_actions);
    c.gamma = sec.number("gamma", c.gamma);
    c.r_max = sec.number("r_max", c.r_max);
    c.xi = sec.number("xi", c.xi);
    c.psi = sec.numbers("psi");
    c.rho = sec.numbers("rho");
    require(c.n_states >= 1, "env.states", "must be >= 1");
    require(c.n_actions >= 1, "env.actions", "must be >= 1");
    require(c.gamma > 0 && c.gamma < 1, "env.gamma", "must lie in (0, 1)");
    require(c.r_max > 0, "env.r_max", "must be positive");
  } else if (type == "gridworld") {
    env.kind = EnvKind::Gridworld;
    GridworldConfig& g = env.grid;
    if (sec.has("layout_file")) {
      std::string path = sec.string("layout_file", "");
      try {
        g.layout = GridworldConfig::load_layout(resolve_layout(path, base_dir));
      } catch (const InvalidInput& e) {
        throw SpecError("env.layout_file", e.what());
      }
    }
    if (sec.has("layout")) {
      const json& rows = sec.raw("layout");
      require(rows.is_array(), "env.layout", "expected an array of strings");
      g.layout.clear();
      for (const auto& r : rows) {
        require(r.is_string(), "env.layout", "expected an array of strings");
        g.layout.push_back(r.get<std::string>());
      }
    }
    g.cost_blank = sec.number("cost_blank", g.cost_blank);
    g.cost_goal = sec.number("cost_goal", g.cost_goal);
    g.cost_hazard = sec.number("cost_hazard", g.cost_hazard);
    g.intervention_cost = sec.number("intervention_cost", g.intervention_cost);
    g.followers = sec.integer("followers", g.followers);
    g.match_prob = sec.number("match_prob", g.match_prob);
    g.boltzmann = sec.number("boltzmann", g.boltzmann);
    g.gamma = sec.number("gamma", g.gamma);
    require(g.followers >= 1, "env.followers", "must be >= 1");
    require(g.match_prob >= 0 && g.match_prob <= 1, "env.match_prob", "must lie in [0, 1]");
    require(g.boltzmann >= 0, "env.boltzmann", "must be >= 0");
    require(g.gamma > 0 && g.gamma < 1, "env.gamma", "must lie in (0, 1)");
    if (!g.layout.empty()) {
      try {
        GridLayout check(g.layout);
        int goals = 0;
        for (int s = 0; s < check.n_states(); ++s) goals += check.cell(s) == Cell::Goal;
        require(goals == 1, "env.layout", "needs exactly one goal cell");
      } catch (const InvalidInput& e) {
        throw SpecError("env.layout", e.what());
      }
    }
  } else if (type == "static") {
    env.kind = EnvKind::Static;
    const json& rows = sec.has("rewards") ? sec.raw("rewards") : json();
    require(rows.is_array() && !rows.empty(), "env.rewards", "expected a nonempty array of arrays");
    for (const auto& r : rows) {
      require(r.is_array() && !r.empty(), "env.rewards", "expected a nonempty array of arrays");
      std::vector<double> row;
      for (const auto& x : r) {
        require(x.is_number(), "env.rewards", "expected numbers");
        row.push_back(x.get<double>());
      }
      env.static_rewards.push_back(row);
    }
    env.static_gamma = sec.number("gamma", env.static_gamma);
    require(env.static_gamma >= 0 && env.static_gamma < 1, "env.gamma", "must lie in [0, 1)");
  } else if (type == "loan") {
    env.kind = EnvKind::Loan;
    LoanConfig& l = env.loan;
    l.sigma = sec.number("sigma", l.sigma);
    l.repay_slope = sec.number("repay_slope", l.repay_slope);
    l.repay_offset = sec.number("repay_offset", l.repay_offset);
    l.payoff = sec.number("payoff", l.payoff);
    l.loss = sec.number("loss", l.loss);
    l.sharpness = sec.number("sharpness", l.sharpness);
    l.beta = sec.number("beta", l.beta);
    l.clamp = sec.number("clamp", l.clamp);
    l.mu0 = sec.number("mu0", l.mu0);
    l.theta0 = sec.number("theta0", l.theta0);
    l.quadrature_nodes = sec.integer("quadrature_nodes", l.quadrature_nodes);
    require(l.sigma > 0, "env.sigma", "must be positive");
    require(l.beta >= 0 && l.beta <= 1, "env.beta", "must lie in [0, 1]");
    require(l.quadrature_nodes >= 64, "env.quadrature_nodes", "must be >= 64");
  } else {
    throw SpecError("env.type", "expected one of expfam, gridworld, static, loan");
  }
  sec.finish();
  return env;
}

TrainConfig parse_train(const json& j) {
  Section sec(j, "train");
  TrainConfig c;
  c.eta = sec.number("eta", c.eta);
  std::string rule = sec.string("eta_rule", "constant");
  require(rule == "constant" || rule == "smoothness", "train.eta_rule", "expected constant or smoothness");
  c.eta_from_smoothness = rule == "smoothness";
  c.lambda = sec.number("lambda", c.lambda);
  c.trajectories = sec.integer("trajectories", c.trajectories);
  c.horizon = sec.integer("horizon", c.horizon);
  c.tail_eps = sec.number("tail_eps", c.tail_eps);
  c.iterations = sec.integer("iterations", c.iterations);
  std::string provider = sec.string("grad_provider", "auto");
  if (provider == "auto") {
    c.provider_from_env = true;
  } else {
    c.provider_from_env = false;
    try {
      c.provider.kind = parse_grad_provider(provider);
    } catch (const InvalidInput&) {
      throw SpecError("train.grad_provider", "expected auto, analytic, fd, directional or zero");
    }
  }
  c.provider.directions = sec.integer("directions", c.provider.directions);
  c.provider.h = sec.number("fd_step", c.provider.h);
  c.discount_weights = sec.boolean("discount_weights", c.discount_weights);
  c.exact_gradient = sec.boolean("exact_gradient", c.exact_gradient);
  c.initial_epsilon = sec.number("initial_epsilon", c.initial_epsilon);
  c.lambda_base = sec.number("lambda_base", c.lambda_base);
  c.memory_weight = sec.number("memory_weight", c.memory_weight);
  c.delay = sec.integer("delay", c.delay);
  c.memory = sec.integer("memory", c.memory);
  c.mdrr_exact_estimates = sec.boolean("mdrr_exact_estimates", c.mdrr_exact_estimates);
  c.record_wall_time = sec.boolean("record_wall_time", c.record_wall_time);
  require(c.eta >= 0, "train.eta", "must be non-negative");
  require(c.lambda >= 0, "train.lambda", "must be non-negative");
  require(c.trajectories >= 1, "train.trajectories", "must be >= 1");
  require(c.horizon >= 0, "train.horizon", "must be >= 0");
  require(c.tail_eps > 0, "train.tail_eps", "must be positive");
  require(c.iterations >= 1, "train.iterations", "must be >= 1");
  require(c.provider.directions >= 1, "train.directions", "must be >= 1");
  require(c.provider.h > 0, "train.fd_step", "must be positive");
  require(c.initial_epsilon >= 0 && c.initial_epsilon <= 1, "train.initial_epsilon", "must lie in [0, 1]");
  require(c.lambda_base > 0, "train.lambda_base", "must be positive");
  require(c.memory_weight > 0, "train.memory_weight", "must be positive");
  require(c.delay >= 1, "train.delay", "must be >= 1");
  require(c.memory >= 1, "train.memory", "must be >= 1");
  sec.finish();
  return c;
}

json* locate(json& doc, const std::string& dotted, bool create) {
  json* node = &doc;
  std::stringstream ss(dotted);
  std::string part;
  while (std::getline(ss, part, '.')) {
    if (part.empty()) throw SpecError(dotted, "empty path segment");
    if (!node->is_object()) throw SpecError(dotted, "path crosses a non-object");
    if (!node->contains(part)) {
      if (!create) return nullptr;
      (*node)[part] = json::object();
    }
    node = &(*node)[part];
  }
  return node;
}

}  // namespace

void apply_override(json& doc, const std::string& assignment) {
  auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw SpecError(assignment, "override must be key=value");
  std::string key = assignment.substr(0, eq), text = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::parse_error&) {
    value = text;
  }
  *locate(doc, key, true) = value;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    if (part.empty()) continue;
    auto dash = part.find('-');
    try {
      if (dash != std::string::npos && dash > 0) {
        std::uint64_t a = std::stoull(part.substr(0, dash)), b = std::stoull(part.substr(dash + 1));
        if (b < a) throw SpecError("seeds", "descending range " + part);
        for (std::uint64_t s = a; s <= b; ++s) out.push_back(s);
      } else {
        out.push_back(std::stoull(part));
      }
    } catch (const std::logic_error&) {
      throw SpecError("seeds", "bad seed '" + part + "'");
    }
  }
  if (out.empty()) throw SpecError("seeds", "empty seed list");
  return out;
}

ExperimentSpec parse_spec(const json& doc, const std::string& base_dir) {
  Section root(doc, "");
  ExperimentSpec spec;
  spec.document = doc;
  spec.base_dir = base_dir;
  require(root.has("env"), "env", "missing required section");
  spec.env = parse_env(root.raw("env"), base_dir);
  require(root.has("algorithms"), "algorithms", "missing required key");
  const json& algos = root.raw("algorithms");
  require(algos.is_array() && !algos.empty(), "algorithms", "expected a nonempty array");
  for (const auto& a : algos) {
    require(a.is_string(), "algorithms", "expected strings");
    try {
      spec.algorithms.push_back(parse_algorithm(a.get<std::string>()));
    } catch (const InvalidInput& e) {
      throw SpecError("algorithms", e.what());
    }
  }
  spec.train = parse_train(root.has("train") ? root.raw("train") : json::object());
  spec.train.env = spec.env;
  if (root.has("seeds")) {
    const json& s = root.raw("seeds");
    if (s.is_string()) {
      spec.seeds = parse_seed_list(s.get<std::string>());
    } else {
      require(s.is_array() && !s.empty(), "seeds", "expected a nonempty array of integers");
      for (const auto& x : s) {
        require(x.is_number_unsigned() || (x.is_number_integer() && x.get<long long>() >= 0), "seeds",
                "expected non-negative integers");
        spec.seeds.push_back(x.get<std::uint64_t>());
      }
    }
  }
  spec.output_dir = root.string("output_dir", spec.output_dir);
  if (root.has("sweep")) {
    Section sw(root.raw("sweep"), "sweep");
    spec.sweep.key = sw.string("key", "");
    require(!spec.sweep.key.empty(), "sweep.key", "missing");
    const json& values = sw.has("values") ? sw.raw("values") : json();
    require(values.is_array() && !values.empty(), "sweep.values", "expected a nonempty array");
    for (const auto& v : values) spec.sweep.values.push_back(v);
    sw.finish();
  }
  root.finish();
  if (!spec.sweep.key.empty()) spec.expand();  // validates every swept value
  for (Algorithm a : spec.algorithms) {
    TrainConfig c = spec.train;
    c.algorithm = a;
    try {
      c.validate();
    } catch (const InvalidInput& e) {
      throw SpecError("algorithms", e.what());
    }
  }
  return spec;
}

ExperimentSpec load_spec(const std::string& path, const std::vector<std::string>& overrides) {
  json doc;
  try {
    doc = json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw SpecError("<document>", std::string("not valid JSON: ") + e.what());
  } catch (const InvalidInput& e) {
    throw SpecError("--spec", e.what());
  }
  for (const auto& o : overrides) apply_override(doc, o);
  return parse_spec(doc, std::filesystem::path(path).parent_path().string());
}

std::string ExperimentSpec::hash() const { return hex64(fnv1a64(document.dump())); }

std::vector<TrainConfig> ExperimentSpec::expand() const {
  std::vector<TrainConfig> out;
  std::vector<json> docs;
  if (sweep.key.empty()) {
    docs.push_back(document);
  } else {
    for (const auto& v : sweep.values) {
      json d = document;
      d.erase("sweep");
      *locate(d, sweep.key, true) = v;
      docs.push_back(d);
    }
  }
  for (const auto& d : docs) {
    ExperimentSpec s = sweep.key.empty() ? *this : parse_spec(d, base_dir);
    for (Algorithm a : s.algorithms) {
      TrainConfig c = s.train;
      c.algorithm = a;
      out.push_back(c);
    }
  }
  return out;
}

std::vector<std::string> ExperimentSpec::labels() const {
  std::vector<std::string> out;
  if (sweep.key.empty()) {
    for (Algorithm a : algorithms) out.push_back(to_string(a));
    return out;
  }
  std::string leaf = sweep.key.substr(sweep.key.rfind('.') + 1);
  for (const auto& v : sweep.values)
    for (Algorithm a : algorithms) {
      std::string text = v.is_string() ? v.get<std::string>() : v.dump();
      std::replace(text.begin(), text.end(), ',', ';');  // labels land in a CSV column
      out.push_back(to_string(a) + "[" + leaf + "=" + text + "]");
    }
  return out;
}

json env_spec_json(const json& doc) { return doc.contains("env") ? doc.at("env") : json(); }

}  // namespace pepg
