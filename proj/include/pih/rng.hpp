#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace pih {

// Deterministic random stream. The mt19937_64 engine is fully specified by
// the standard; uniform/gaussian draws are implemented here instead of using
// std distributions, whose output is implementation-defined. Identical seeds
// therefore give bit-identical sequences on every platform.
class RandomStream {
 public:
  explicit RandomStream(uint64_t seed) : engine_(splitmix(seed)) {}

  uint64_t next_u64() { return engine_(); }

  // [0, 1)
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // inclusive bounds
  int uniform_int(int lo, int hi) {
    return lo + static_cast<int>(engine_() % static_cast<uint64_t>(hi - lo + 1));
  }

  // standard normal via Box-Muller
  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double mag = std::sqrt(-2.0 * std::log(u1));
    spare_ = mag * std::sin(2.0 * M_PI * u2);
    have_spare_ = true;
    return mag * std::cos(2.0 * M_PI * u2);
  }

  double gaussian(double mean, double stddev) { return mean + stddev * gaussian(); }

  // Independent child stream; used to split one trial seed into per-phase
  // streams so that adding draws in one phase does not shift another.
  RandomStream child(uint64_t salt) {
    return RandomStream(splitmix(engine_() ^ (salt * 0x9E3779B97F4A7C15ull)));
  }

 private:
  static uint64_t splitmix(uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
  }

  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace pih
