#pragma once

// Plain Monte Carlo oracle for compound tails. Every sample owns a
// counter-based stream keyed by (seed, sample index), so results do not
// depend on evaluation order or on how samples are split across workers.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "subexp/counts.hpp"
#include "subexp/errors.hpp"
#include "subexp/models.hpp"
#include "subexp/numeric.hpp"

namespace subexp {

inline constexpr std::size_t kMinSimulationSamples = 10000;

/// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Stream of uniforms in (0, 1) determined by (seed, stream) alone.
class CounterStream {
 public:
  CounterStream(std::uint64_t seed, std::uint64_t stream) noexcept : key_(mix64(seed ^ mix64(stream))) {}

  std::uint64_t next_u64() noexcept { return mix64(key_ + 0x632be59bd9b4e019ULL * ++counter_); }

  /// 53-bit midpoint grid, never 0 or 1.
  double next_uniform() noexcept {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

/// Inverse-survival draw: the smallest x with F(x, inf) <= u.
template <HeavyTailModel M>
double sample_model(const M& model, double u) {
  return model.sample(u);
}

/// Count sampler by inverse CDF over a precomputed table. The table stops
/// once the remaining mass is below 1e-15; uniforms beyond it map to the
/// last support point.
class CountSampler {
 public:
  explicit CountSampler(const CountModel& count) {
    long n_last;
    if (auto top = count.max_support()) {
      n_last = *top;
    } else {
      n_last = series_truncation(count, 1.0, 1e-15);
    }
    CompensatedSum acc;
    cdf_.reserve(static_cast<std::size_t>(n_last) + 1);
    for (long n = 0; n <= n_last; ++n) {
      acc += count.pmf(n);
      cdf_.push_back(acc.value());
    }
  }

  long draw(double u) const {
    const auto it = std::lower_bound(cdf_.begin(), cdf_.end(), u);
    if (it == cdf_.end()) return static_cast<long>(cdf_.size()) - 1;
    return static_cast<long>(it - cdf_.begin());
  }

 private:
  std::vector<double> cdf_;
};

struct SimulationEstimate {
  double x = 0.0;
  double estimate = 0.0;
  double std_error = 0.0;
  std::size_t n_samples = 0;
  std::uint64_t seed = 0;
};

/// Draws of S_N, one stream per sample. Stream i uses its first uniform for
/// N and the next N uniforms for the summands.
template <HeavyTailModel M>
std::vector<double> simulate_compound_sums(const M& model, const CountModel& count, std::size_t n_samples,
                                           std::uint64_t seed) {
  const CountSampler counts(count);
  std::vector<double> sums(n_samples);
  for (std::size_t i = 0; i < n_samples; ++i) {
    CounterStream rng(seed, i);
    const long n = counts.draw(rng.next_uniform());
    double s = 0.0;
    for (long k = 0; k < n; ++k) s += model.sample(rng.next_uniform());
    sums[i] = s;
  }
  return sums;
}

/// Estimates P(S_N > x) for every x from one shared sample set.
template <HeavyTailModel M>
std::vector<SimulationEstimate> simulate_compound_tail(const M& model, const CountModel& count,
                                                       std::span<const double> x_grid, std::size_t n_samples,
                                                       std::optional<std::uint64_t> seed) {
  if (!seed) throw ConfigError("montecarlo.seed", "a seed is required");
  if (n_samples < kMinSimulationSamples)
    throw ConfigError("montecarlo.n_samples", "must be >= " + std::to_string(kMinSimulationSamples));
  auto sums = simulate_compound_sums(model, count, n_samples, *seed);
  std::sort(sums.begin(), sums.end());
  const double n = static_cast<double>(n_samples);
  std::vector<SimulationEstimate> out;
  out.reserve(x_grid.size());
  for (double x : x_grid) {
    const auto above = static_cast<double>(sums.end() - std::upper_bound(sums.begin(), sums.end(), x));
    const double p = above / n;
    out.push_back({x, p, std::sqrt(p * (1.0 - p) / n), n_samples, *seed});
  }
  return out;
}

/// Grid points where the expected exceedance count P(S > x) * n_samples,
/// judged by `tail_estimate`, is at least `min_exceedances`.
template <class TailFn>
std::vector<double> checkable_grid(std::span<const double> x_grid, TailFn tail_estimate, std::size_t n_samples,
                                   double min_exceedances = 100.0) {
  std::vector<double> out;
  for (double x : x_grid)
    if (tail_estimate(x) * static_cast<double>(n_samples) >= min_exceedances) out.push_back(x);
  return out;
}

}  // namespace subexp
