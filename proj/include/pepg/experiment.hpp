#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "pepg/trainers.hpp"

namespace pepg {

// Schema violation; `key` names the offending dotted path.
struct SpecError : std::runtime_error {
  SpecError(std::string key, const std::string& message)
      : std::runtime_error(key + ": " + message), key(std::move(key)) {}
  std::string key;
};

struct SweepAxis {
  std::string key;  // dotted path, e.g. train.lambda
  std::vector<nlohmann::json> values;
};

struct ExperimentSpec {
  nlohmann::json document;  // after overrides
  EnvSpec env;
  std::vector<Algorithm> algorithms;
  TrainConfig train;  // algorithm and seed filled per run
  std::vector<std::uint64_t> seeds;
  std::string output_dir = "out";
  SweepAxis sweep;  // empty key: no sweep
  std::string base_dir;  // spec file's directory, for relative layout files

  std::string hash() const;
  // One config per (sweep value, algorithm), in document order.
  std::vector<TrainConfig> expand() const;
  std::vector<std::string> labels() const;
};

// Applies "a.b.c=value"; value parsed as JSON, falling back to a string.
void apply_override(nlohmann::json& doc, const std::string& assignment);

// Relative layout_file paths are tried from the working directory, then base_dir, then its parent.
ExperimentSpec parse_spec(const nlohmann::json& doc, const std::string& base_dir = {});
ExperimentSpec load_spec(const std::string& path, const std::vector<std::string>& overrides = {});

nlohmann::json env_spec_json(const nlohmann::json& doc);
std::vector<std::uint64_t> parse_seed_list(const std::string& text);

}  // namespace pepg
