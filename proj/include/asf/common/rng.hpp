#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace asf {

// Combines two 64-bit values into a well-mixed seed (splitmix64 finalizer).
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

// Deterministic random source. Distributions are implemented here rather than
// taken from <random> so sequences are identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi);
  // Uniform integer on the closed range [lo, hi].
  int uniform_int(int lo, int hi);
  bool coin() { return (next_u64() >> 63) != 0; }
  double normal();
  int poisson(double mean);

  // Textual engine state; round-trips through set_state().
  std::string state() const;
  void set_state(const std::string& state);

  bool operator==(const Rng& other) const { return engine_ == other.engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace asf
