#pragma once

#include <cmath>
#include <vector>

#include "pangenome/errors.hpp"
#include "pangenome/rng.hpp"

namespace pangenome {

// Line-count chain of the single-gene ancestral graph after halving: constant
// birth rate lambda_i = gamma, death rate mu_i = i - 1 + rho, absorbing at 0.
// The graph length is twice the absorption time started from the sample size.
struct BirthDeathSpec {
  double gamma = 0.0;
  double rho = 1.0;

  double birth_rate(long) const { return gamma; }
  double death_rate(long i) const { return static_cast<double>(i) - 1.0 + rho; }
};

inline constexpr long kHittingSeriesCap = 1'000'000;

// E[T | Z_0 = n] as the double series sum_i p_i + sum_{k<n} prod(mu_r/lambda_r)
// sum_{m>k} p_m with p_i = gamma^{i-1} / (rho)_i.  Each k-block is summed with
// the prefactor folded in, sum_{j>=1} gamma^{j-1} / ((rho+k)_j), which is the
// same factored product but does not hit 0/0 at gamma = 0 (where only the j=1
// term survives and the block telescopes to 1/(rho+k)).
inline double expected_hitting_time(const BirthDeathSpec& spec, long start,
                                    double tol = 1e-15) {
  if (start < 1) throw RangeError("start", "needs start >= 1");
  if (!(spec.rho > 0.0)) throw RangeError("rho", "needs rho > 0");
  if (!(spec.gamma >= 0.0)) throw RangeError("gamma", "needs gamma >= 0");
  double total = 0.0;
  for (long k = 0; k < start; ++k) {
    const double a = spec.rho + static_cast<double>(k);
    double term = 1.0 / a;  // j = 1
    double block = term;
    long j = 1;
    while (term > tol * block) {
      term *= spec.gamma / (a + static_cast<double>(j));
      block += term;
      if (++j > kHittingSeriesCap)
        throw NonConvergence("expected_hitting_time: series cap reached");
    }
    total += block;
  }
  return total;
}

// One absorption time of the chain, by direct jump simulation.  Holding times
// are accumulated with Neumaier compensation; the variance checks downstream
// are sensitive to summation error on long excursions.
inline double simulate_hitting_time(const BirthDeathSpec& spec, long start,
                                    Rng& rng) {
  if (start < 1) throw RangeError("start", "needs start >= 1");
  long z = start;
  double t = 0.0, comp = 0.0;
  while (z > 0) {
    const double up = spec.birth_rate(z);
    const double down = spec.death_rate(z);
    const double total = up + down;
    const double dt = rng.exponential(total);
    const double s = t + dt;
    comp += std::fabs(t) >= dt ? (t - s) + dt : (dt - s) + t;
    t = s;
    z += (rng.uniform() * total < up) ? 1 : -1;
  }
  return t + comp;
}

// E[e^{sT} | Z_0 = n], the absorption-time exponential moment, via Miller's
// backward recursion for the minimal solution of
//   (gamma + mu_i - s) f_i = gamma f_{i+1} + mu_i f_{i-1},   f_0 = 1.
// Returns NaN when the recursion shows s is outside the convergence domain.
inline double hitting_time_mgf(const BirthDeathSpec& spec, long start,
                               double s) {
  if (start < 1) throw RangeError("start", "needs start >= 1");
  if (s <= 0.0) return 1.0;  // only used with s > 0; e^{0 T} = 1
  if (s >= spec.rho) return std::nan("");
  long trunc = start + 64;
  double prev = std::nan("");
  for (int round = 0; round < 8; ++round, trunc *= 2) {
    std::vector<double> y(static_cast<std::size_t>(trunc) + 2, 0.0);
    y[static_cast<std::size_t>(trunc) + 1] = 0.0;
    y[static_cast<std::size_t>(trunc)] = 1.0;
    bool ok = true;
    for (long i = trunc; i >= 1; --i) {
      const double mu = spec.death_rate(i);
      const double next =
          ((spec.gamma + mu - s) * y[static_cast<std::size_t>(i)] -
           spec.gamma * y[static_cast<std::size_t>(i) + 1]) /
          mu;
      if (!std::isfinite(next) || next <= 0.0) {
        ok = false;
        break;
      }
      y[static_cast<std::size_t>(i) - 1] = next;
    }
    if (!ok) return std::nan("");
    const double f = y[static_cast<std::size_t>(start)] / y[0];
    if (!std::isfinite(f) || f < 1.0) return std::nan("");
    if (std::isfinite(prev) && std::fabs(f - prev) <= 1e-12 * f) return f;
    prev = f;
  }
  return prev;
}

}  // namespace pangenome
