#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "subexp/lattice.hpp"
#include "subexp/montecarlo.hpp"

using namespace subexp;

namespace {

constexpr std::size_t kSamples = 200000;

}  // namespace

TEST(CounterStream, UniformsInOpenInterval) {
  CounterStream rng(1, 2);
  double sum = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const double u = rng.next_uniform();
    ASSERT_GT(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
  }
  EXPECT_NEAR(sum / 100000.0, 0.5, 0.005);
}

TEST(CounterStream, StreamsAreDistinctAndReproducible) {
  CounterStream a(7, 0), b(7, 1), c(7, 0);
  const double ua = a.next_uniform();
  EXPECT_NE(ua, b.next_uniform());
  EXPECT_EQ(ua, c.next_uniform());
}

TEST(CountSampler, MatchesPmf) {
  const auto count = CountModel::poisson(2.0);
  const CountSampler sampler(count);
  CounterStream rng(3, 0);
  std::vector<double> freq(20, 0.0);
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const long k = sampler.draw(rng.next_uniform());
    if (k < 20) freq[static_cast<std::size_t>(k)] += 1.0;
  }
  for (long k = 0; k < 6; ++k) {
    const double p = count.pmf(k);
    EXPECT_NEAR(freq[static_cast<std::size_t>(k)] / n, p, 4.0 * std::sqrt(p * (1 - p) / n)) << k;
  }
}

TEST(CountSampler, FiniteSupportOnlyHitsAtoms) {
  const CountSampler sampler(CountModel::finite_support({{1, 0.5}, {4, 0.5}}));
  CounterStream rng(5, 0);
  std::set<long> seen;
  for (int i = 0; i < 1000; ++i) seen.insert(sampler.draw(rng.next_uniform()));
  EXPECT_EQ(seen, (std::set<long>{1, 4}));
}

TEST(SimulateTail, DeterministicZeroIsZero) {
  const std::vector<double> xs{0.5, 10.0};
  for (const auto& e : simulate_compound_tail(ParetoModel(1.0, 2.0), CountModel::deterministic(0), xs, 10000, 1)) {
    EXPECT_EQ(e.estimate, 0.0);
    EXPECT_EQ(e.std_error, 0.0);
  }
}

TEST(SimulateTail, DeterministicOneMatchesTail) {
  const std::vector<double> xs{10.0};
  const auto e = simulate_compound_tail(ParetoModel(1.0, 2.0), CountModel::deterministic(1), xs, kSamples, 11)[0];
  EXPECT_EQ(e.n_samples, kSamples);
  EXPECT_EQ(e.seed, 11u);
  EXPECT_NEAR(e.estimate, 0.01, 3.0 * e.std_error);
}

TEST(SimulateTail, GeometricMatchesLatticeBracket) {
  const ParetoModel m(1.0, 2.0);
  const auto count = CountModel::geometric(0.5);
  const auto pair = discretize_pair(m, 0.02, 200.0);
  const std::vector<double> xs{50.0};
  const double hi = compound_tail(pair.upper, count, xs)[0];
  const double lo = compound_tail(pair.lower, count, xs)[0];
  const auto e = simulate_compound_tail(m, count, xs, kSamples, 2024)[0];
  EXPECT_NEAR(e.estimate, 0.5 * (lo + hi), 3.0 * e.std_error + 0.5 * (hi - lo));
}

TEST(SimulateTail, SameSeedSameEstimates) {
  const std::vector<double> xs{5.0, 20.0, 80.0};
  const auto count = CountModel::poisson(1.5);
  const auto a = simulate_compound_tail(WeibullModel(0.5), count, xs, 20000, 99);
  const auto b = simulate_compound_tail(WeibullModel(0.5), count, xs, 20000, 99);
  const auto c = simulate_compound_tail(WeibullModel(0.5), count, xs, 20000, 100);
  bool differs = false;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    EXPECT_EQ(a[i].estimate, b[i].estimate);
    differs = differs || a[i].estimate != c[i].estimate;
  }
  EXPECT_TRUE(differs);
}

TEST(SimulateTail, Refusals) {
  const std::vector<double> xs{1.0};
  try {
    simulate_compound_tail(ParetoModel(1.0, 2.0), CountModel::geometric(0.5), xs, 9999, 1);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("montecarlo.n_samples"), std::string::npos);
  }
  try {
    simulate_compound_tail(ParetoModel(1.0, 2.0), CountModel::geometric(0.5), xs, 10000, std::nullopt);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("montecarlo.seed"), std::string::npos);
  }
}

TEST(SimulateSums, ParetoSampleMean) {
  // Pareto(1, 2.5): mean 5/3, E X^2 = 2.5 / 0.5 = 5
  const auto sums = simulate_compound_sums(ParetoModel(1.0, 2.5), CountModel::deterministic(1), kSamples, 8);
  const double mean = std::accumulate(sums.begin(), sums.end(), 0.0) / static_cast<double>(kSamples);
  const double var = 5.0 - 25.0 / 9.0;
  EXPECT_NEAR(mean, 5.0 / 3.0, 4.0 * std::sqrt(var / static_cast<double>(kSamples)));
  EXPECT_GE(*std::min_element(sums.begin(), sums.end()), 1.0);
}

TEST(CheckableGrid, KeepsPointsWithEnoughExceedances) {
  const std::vector<double> xs{10.0, 100.0, 1000.0};
  const auto kept = checkable_grid(xs, [](double x) { return 1.0 / (x * x); }, 1000000);
  EXPECT_EQ(kept, (std::vector<double>{10.0, 100.0}));
}
