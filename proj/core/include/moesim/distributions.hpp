#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace moesim {

// All randomness flows through this wrapper.  The transforms are written out
// here instead of using std::*_distribution so a seed pins the exact sample
// stream independent of the standard library implementation.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  // uniform double in [0, 1), 53-bit resolution
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  // uniform integer in [lo, hi] inclusive
  int uniform_int(int lo, int hi);

  // exponential with the given rate (mean 1/rate)
  double exponential(double rate);

  // standard normal via Box-Muller
  double normal();

  std::uint64_t next() { return gen_(); }

 private:
  std::mt19937_64 gen_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// Token-count distribution descriptor used by task profiles.
struct LengthDist {
  enum class Family { constant, uniform, lognormal };

  Family family = Family::constant;
  // constant:  value = a
  // uniform:   integer in [a, b]
  // lognormal: a = mean, b = p90 of the continuous law
  double a = 0.0;
  double b = 0.0;

  void validate(const std::string& field) const;
  int sample(Rng& rng) const;  // always >= 1
  double mean() const;
};

// Solve for the log-normal (mu, sigma) matching a given mean and 90th
// percentile.  Throws ValidationError when no such parameters exist.
void lognormal_from_mean_p90(double mean, double p90, double& mu, double& sigma);

}  // namespace moesim
