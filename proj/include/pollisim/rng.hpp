#pragma once

#include <cstdint>
#include <random>

namespace pollisim {

/// Seeded random stream. All simulator randomness flows through explicit
/// instances of this class; there is no global engine.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Zero-mean Gaussian draw; sigma <= 0 returns 0 without consuming state.
  double gauss(double sigma) {
    if (sigma <= 0.0) return 0.0;
    std::normal_distribution<double> d(0.0, sigma);
    return d(engine_);
  }

  double uniform(double lo, double hi) {
    std::uniform_real_distribution<double> d(lo, hi);
    return d(engine_);
  }

  int uniform_int(int lo, int hi) {  // inclusive bounds
    std::uniform_int_distribution<int> d(lo, hi);
    return d(engine_);
  }

  bool bernoulli(double p) {
    if (p <= 0.0) return false;
    if (p >= 1.0) return true;
    std::bernoulli_distribution d(p);
    return d(engine_);
  }

  int poisson(double rate) {
    if (rate <= 0.0) return 0;
    std::poisson_distribution<int> d(rate);
    return d(engine_);
  }

  std::uint64_t raw() { return engine_(); }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace pollisim
