#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace pepg {

// Deterministic stream. Distributions are implemented here rather than via
// std:: distribution classes so output does not depend on the standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  // Independent child stream keyed by `stream`.
  Rng split(std::uint64_t stream) const;

  std::uint64_t next_u64() { return engine_(); }
  double uniform();  // [0, 1)
  double normal();
  int uniform_int(int n);
  int categorical(const double* probs, int n);

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace pepg
