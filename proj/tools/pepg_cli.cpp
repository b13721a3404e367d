// pepg: train / verify / sweep / plot front end.
// exit codes: 0 ok, 1 verification failure, 2 bad spec or arguments, 3 run aborted.

#include <glob.h>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>

#include "CLI11.hpp"
#include "json.hpp"
#include "pepg/experiment.hpp"
#include "pepg/io.hpp"
#include "pepg/trainers.hpp"
#include "pepg/verify.hpp"

namespace fs = std::filesystem;
using namespace pepg;

namespace {

constexpr int kExitVerifyFail = 1;
constexpr int kExitSpec = 2;
constexpr int kExitAbort = 3;

struct Options {
  std::string spec;
  std::string seeds;
  std::string out;
  std::vector<std::string> overrides;
  std::string suite = "all";
  int jobs = 1;
  std::string kind = "curves";
  std::vector<std::string> inputs;
  bool corrupt_advantage = false;
  int instances = 50;
};

std::string file_label(const std::string& label) {
  std::string out;
  for (char c : label) {
    if (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '.' || c == '_')
      out += c;
    else if (c == '=' || c == '[')
      out += '_';
  }
  return out;
}

std::vector<std::uint64_t> resolve_seeds(const Options& o, const ExperimentSpec& spec) {
  if (!o.seeds.empty()) return parse_seed_list(o.seeds);
  if (!spec.seeds.empty()) return spec.seeds;
  if (const char* env = std::getenv("PEPG_SEED")) return parse_seed_list(env);
  return {0};
}

std::uint64_t single_seed(const Options& o) {
  if (!o.seeds.empty()) return parse_seed_list(o.seeds).front();
  if (const char* env = std::getenv("PEPG_SEED")) return parse_seed_list(env).front();
  return 0;
}

// Runs every (config, seed), writes one CSV + manifest per run.
int run_experiment(const Options& o, bool write_aggregate) {
  ExperimentSpec spec = load_spec(o.spec, o.overrides);
  std::vector<std::uint64_t> seeds = resolve_seeds(o, spec);
  std::string out_dir = o.out.empty() ? spec.output_dir : o.out;
  fs::create_directories(out_dir);

  std::vector<TrainConfig> configs = spec.expand();
  std::vector<std::string> labels = spec.labels();
  std::vector<SweepEntry> entries = sweep(configs, seeds, o.jobs);

  const std::string hash = spec.hash();
  bool aborted = false;
  nlohmann::ordered_json summary = nlohmann::ordered_json::array();
  for (size_t ci = 0; ci < entries.size(); ++ci) {
    SweepEntry& e = entries[ci];
    for (RunRecord& rec : e.runs) {
      rec.algo = labels[ci];
      std::string stem = out_dir + "/" + file_label(labels[ci]) + "_seed" + std::to_string(rec.seed);
      write_text(stem + ".csv", run_csv(rec));
      nlohmann::ordered_json manifest;
      manifest["config_hash"] = hash;
      manifest["seed"] = rec.seed;
      manifest["algo"] = rec.algo;
      manifest["git_describe"] = git_describe();
      manifest["env"] = env_spec_json(spec.document);
      manifest["train"] = spec.document.value("train", nlohmann::json::object());
      manifest["aborted"] = rec.aborted;
      if (rec.aborted) manifest["abort_reason"] = rec.abort_reason;
      for (const auto& [k, v] : rec.summary) manifest["summary"][k] = v;
      write_text(stem + ".json", manifest.dump(2) + "\n");
    }
    for (const auto& f : e.failures) {
      std::cerr << "run failed: " << labels[ci] << " " << f << "\n";
      aborted = true;
    }
    if (write_aggregate) {
      nlohmann::ordered_json row;
      row["label"] = labels[ci];
      row["runs"] = e.runs.size();
      if (!e.mc_return.empty()) {
        row["final_mc_return_mean"] = e.mc_return.back().mean;
        row["final_mc_return_stderr"] = e.mc_return.back().stderr_;
        row["final_exact_value_mean"] = e.exact_value.back().mean;
        row["final_exact_value_stderr"] = e.exact_value.back().stderr_;
      }
      summary.push_back(row);
      std::cout << labels[ci] << ": runs=" << e.runs.size();
      if (!e.mc_return.empty())
        std::cout << " final mc_return=" << format_double(e.mc_return.back().mean) << " +- "
                  << format_double(e.mc_return.back().stderr_);
      std::cout << "\n";
    }
  }
  if (write_aggregate) {
    nlohmann::ordered_json doc;
    doc["config_hash"] = hash;
    doc["seeds"] = seeds;
    doc["entries"] = summary;
    write_text(out_dir + "/sweep_summary.json", doc.dump(2) + "\n");
  }
  std::cout << "wrote " << out_dir << "\n";
  return aborted ? kExitAbort : 0;
}

int cmd_verify(const Options& o) {
  std::uint64_t seed = single_seed(o);
  SuiteOptions so;
  so.seed = seed;
  so.instances = o.instances;
  so.advantage_bias = o.corrupt_advantage ? 1e-3 : 0.0;
  std::vector<LemmaReport> reports;
  auto add = [&](std::vector<LemmaReport> r) { reports.insert(reports.end(), r.begin(), r.end()); };
  const std::string& s = o.suite;
  if (s == "identities" || s == "all") add(run_identity_suite(so));
  if (s == "inequalities" || s == "all") add(run_inequality_suite(so));
  if (s == "consistency") add(run_consistency_suite(seed));
  if (s == "ascent") add(run_ascent_suite(seed));
  if (reports.empty()) throw SpecError("--suite", "expected identities, inequalities, consistency, ascent or all");

  std::cout << reports_table(reports);
  if (!o.out.empty()) {
    fs::create_directories(o.out);
    write_text(o.out + "/verify_" + s + ".json", reports_json(reports));
  }
  int failed = 0;
  for (const auto& r : reports) failed += !r.pass;
  std::cout << reports.size() - failed << "/" << reports.size() << " passed\n";
  return failed ? kExitVerifyFail : 0;
}

std::vector<std::string> expand_inputs(const std::vector<std::string>& patterns) {
  std::vector<std::string> out;
  for (const auto& p : patterns) {
    if (p.find_first_of("*?[") == std::string::npos) {
      if (fs::is_directory(p)) {
        std::vector<std::string> found;
        for (const auto& e : fs::directory_iterator(p))
          if (e.path().extension() == ".csv") found.push_back(e.path().string());
        std::sort(found.begin(), found.end());
        out.insert(out.end(), found.begin(), found.end());
      } else if (fs::exists(p)) {
        out.push_back(p);
      }
      continue;
    }
    glob_t g{};
    if (glob(p.c_str(), 0, nullptr, &g) == 0)
      for (size_t i = 0; i < g.gl_pathc; ++i) out.push_back(g.gl_pathv[i]);
    globfree(&g);
  }
  return out;
}

int cmd_plot(const Options& o) {
  PlotKind kind = parse_plot_kind(o.kind);
  std::vector<std::string> files = expand_inputs(o.inputs);
  if (files.empty()) {
    std::cerr << "no inputs\n";
    return kExitSpec;
  }
  std::vector<CsvRun> runs;
  for (const auto& f : files) runs.push_back(parse_run_csv(read_text(f)));
  std::string path = o.out.empty() ? "plot_" + o.kind + ".svg" : o.out;
  if (fs::path(path).has_parent_path()) fs::create_directories(fs::path(path).parent_path());
  write_text(path, plot_svg(runs, kind));
  std::cout << "wrote " << path << " from " << files.size() << " runs\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Performative policy gradient experiments"};
  app.require_subcommand(1);
  Options o;

  auto* train = app.add_subcommand("train", "run every algorithm in a spec for each seed");
  train->add_option("--spec", o.spec, "experiment spec (JSON)")->required();
  train->add_option("--seed", o.seeds, "seed list, e.g. 0,1,2 or 0-19");
  train->add_option("--out", o.out, "output directory (default: spec output_dir)");
  train->add_option("--override", o.overrides, "key=value, dotted key (repeatable)");
  train->add_option("--jobs", o.jobs, "worker threads")->check(CLI::PositiveNumber);

  auto* sw = app.add_subcommand("sweep", "like train, plus a per-config summary");
  sw->add_option("--spec", o.spec, "experiment spec (JSON)")->required();
  sw->add_option("--seed", o.seeds, "seed list");
  sw->add_option("--out", o.out, "output directory");
  sw->add_option("--override", o.overrides, "key=value (repeatable)");
  sw->add_option("--jobs", o.jobs, "worker threads")->check(CLI::PositiveNumber);

  auto* verify = app.add_subcommand("verify", "check identities and bounds on random instances");
  verify->add_option("--suite", o.suite, "identities, inequalities, consistency, ascent or all");
  verify->add_option("--seed", o.seeds, "base seed");
  verify->add_option("--out", o.out, "directory for the JSON report");
  verify->add_option("--instances", o.instances, "random instances per suite")->check(CLI::PositiveNumber);
  verify->add_flag("--corrupt-advantage", o.corrupt_advantage, "test hook: bias the advantage by 1e-3")
      ->group("");

  auto* plot = app.add_subcommand("plot", "SVG plot from run CSVs");
  plot->add_option("inputs", o.inputs, "CSV files, directories or glob patterns");
  plot->add_option("--kind", o.kind, "curves, stability or sweep-bars");
  plot->add_option("--out", o.out, "output SVG path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : kExitSpec;
  }

  try {
    if (*train) return run_experiment(o, false);
    if (*sw) return run_experiment(o, true);
    if (*verify) return cmd_verify(o);
    if (*plot) return cmd_plot(o);
  } catch (const SpecError& e) {
    std::cerr << "spec error: " << e.what() << "\n";
    return kExitSpec;
  } catch (const InvalidInput& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return kExitSpec;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitAbort;
  }
  return 0;
}
