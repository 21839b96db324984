#include "moesim/distributions.hpp"

#include <cmath>

#include "moesim/types.hpp"

namespace moesim {

int Rng::uniform_int(int lo, int hi) {
  // rejection-free scaling is fine at these ranges
  const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
  return lo + static_cast<int>(static_cast<std::uint64_t>(uniform() * static_cast<double>(span)) % span);
}

double Rng::exponential(double rate) {
  double u;
  do {
    u = uniform();
  } while (u <= 0.0);
  return -std::log(u) / rate;
}

double Rng::normal() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  double u1;
  do {
    u1 = uniform();
  } while (u1 <= 0.0);
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * 3.14159265358979323846 * u2;
  spare_ = r * std::sin(theta);
  have_spare_ = true;
  return r * std::cos(theta);
}

namespace {
constexpr double kZ90 = 1.2815515655446004;  // standard normal 90th percentile
}

void lognormal_from_mean_p90(double mean, double p90, double& mu, double& sigma) {
  if (mean <= 0.0 || p90 <= 0.0)
    throw ValidationError("lognormal: mean and p90 must be > 0");
  const double a = std::log(mean);
  const double b = std::log(p90);
  // mean = exp(mu + sigma^2/2), p90 = exp(mu + z90 * sigma)
  // => sigma^2/2 - z90 * sigma - (a - b) = 0, take the smaller root
  const double disc = kZ90 * kZ90 + 2.0 * (a - b);
  if (disc < 0.0)
    throw ValidationError("lognormal: p90 too far above mean, no valid sigma");
  sigma = kZ90 - std::sqrt(disc);
  if (sigma < 0.0)
    throw ValidationError("lognormal: p90 must not be below the mean");
  mu = a - sigma * sigma / 2.0;
}

void LengthDist::validate(const std::string& field) const {
  switch (family) {
    case Family::constant:
      if (a < 1.0) throw ValidationError(field + ": constant value must be >= 1");
      break;
    case Family::uniform:
      if (a < 1.0 || b < a)
        throw ValidationError(field + ": uniform bounds need 1 <= lo <= hi");
      break;
    case Family::lognormal: {
      double mu, sigma;
      try {
        lognormal_from_mean_p90(a, b, mu, sigma);
      } catch (const ValidationError& e) {
        throw ValidationError(field + ": " + e.what());
      }
      break;
    }
  }
}

int LengthDist::sample(Rng& rng) const {
  switch (family) {
    case Family::constant:
      return static_cast<int>(std::lround(a));
    case Family::uniform:
      return rng.uniform_int(static_cast<int>(std::lround(a)), static_cast<int>(std::lround(b)));
    case Family::lognormal: {
      double mu, sigma;
      lognormal_from_mean_p90(a, b, mu, sigma);
      const double v = std::exp(mu + sigma * rng.normal());
      const long n = std::lround(v);
      return n < 1 ? 1 : static_cast<int>(n);
    }
  }
  return 1;
}

double LengthDist::mean() const {
  switch (family) {
    case Family::constant: return a;
    case Family::uniform: return (a + b) / 2.0;
    case Family::lognormal: return a;
  }
  return a;
}

}  // namespace moesim
