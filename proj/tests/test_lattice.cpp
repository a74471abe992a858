#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <gtest/gtest.h>

#include "subexp/lattice.hpp"

using namespace subexp;

namespace {

// naive O(n^2) convolution, kept separate from the library kernel
std::vector<double> brute_convolve(std::span<const double> a, std::span<const double> b) {
  std::vector<double> out(a.size(), 0.0);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; i + j < a.size(); ++j) out[i + j] += a[i] * b[j];
  return out;
}

// P(X1 + X2 > x) for Pareto(1, 2) (support [1, inf), density 2 y^-3) by quadrature:
// F(x) + int_1^{x-1} (x-y)^-2 2y^-3 dy + int_{x-1}^x 2y^-3 dy, for x >= 2
double pareto2_two_fold_tail(double x) {
  using boost::math::quadrature::gauss_kronrod;
  auto f = [x](double y) { return std::pow(x - y, -2.0) * 2.0 * std::pow(y, -3.0); };
  const double mid = 0.5 * x;
  const double inner = gauss_kronrod<double, 61>::integrate(f, 1.0, mid, 20, 1e-14) +
                       gauss_kronrod<double, 61>::integrate(f, mid, x - 1.0, 20, 1e-14);
  const double last = std::pow(x - 1.0, -2.0) - std::pow(x, -2.0);
  return std::pow(x, -2.0) + inner + last;
}

}  // namespace

TEST(Discretize, GridTooShortIsNumericalError) {
  EXPECT_THROW(discretize(ParetoModel(1.0, 2.0), 0.5, 1.0, Rounding::Upper), NumericalError);
}

TEST(Discretize, InvalidArgumentsNameTheField) {
  try {
    discretize(ParetoModel(1.0, 2.0), 0.0, 10.0, Rounding::Upper);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("lattice.step"), std::string::npos);
  }
  EXPECT_THROW(discretize(ParetoModel(1.0, 2.0), 0.1, -1.0, Rounding::Upper), ConfigError);
}

TEST(Discretize, SingleCellMassUnderUpperRounding) {
  const auto up = discretize(PointMassModel(0.3), 1.0, 1.0, Rounding::Upper);
  ASSERT_EQ(up.size(), 2u);
  EXPECT_DOUBLE_EQ(up.masses()[1], 1.0);
  EXPECT_DOUBLE_EQ(up.masses()[0], 0.0);
  EXPECT_EQ(up.tail_beyond(), 0.0);
  const auto lo = discretize(PointMassModel(0.3), 1.0, 1.0, Rounding::Lower);
  EXPECT_DOUBLE_EQ(lo.masses()[0], 1.0);
}

TEST(Discretize, ParetoMassAndBracketWidth) {
  const ParetoModel m(1.0, 2.0);
  const double h = 0.01;
  const auto pair = discretize_pair(m, h, 1000.0);
  EXPECT_NEAR(compensated_sum(pair.upper.masses()), 1.0 - 1e-6, 1e-12);
  EXPECT_NEAR(pair.upper.tail_beyond(), 1e-6, 1e-15);
  EXPECT_NEAR(pair.upper.total_mass(), 1.0, 1e-12);
  for (double x : geometric_grid(2.0, 999.0, kEighthDecade)) {
    const double xs = std::round(x / h) * h;
    const Bracket b = pair.tail(xs);
    EXPECT_LE(b.lo, m.tail(xs) * (1 + 1e-12)) << xs;
    EXPECT_GE(b.hi, m.tail(xs) * (1 - 1e-12)) << xs;
    EXPECT_LE(b.width(), m.local_mass(xs - h, h) * (1 + 1e-9) + 1e-15) << xs;
  }
}

TEST(Discretize, LowerNeverExceedsUpper) {
  const auto pair = discretize_pair(WeibullModel(0.5), 0.1, 200.0);
  for (long k = -1; k < static_cast<long>(pair.upper.size()) + 5; ++k)
    EXPECT_LE(pair.lower.tail_at_index(k), pair.upper.tail_at_index(k) + 1e-15) << k;
}

TEST(Discretize, BeyondGridRule) {
  const auto pair = discretize_pair(ParetoModel(1.0, 2.0), 0.5, 20.0);
  EXPECT_DOUBLE_EQ(pair.upper.tail(50.0), pair.upper.tail_beyond());
  EXPECT_EQ(pair.lower.tail(50.0), 0.0);
}

TEST(Convolution, AtomPowers) {
  const double h = 0.25;
  const auto base = discretize(PointMassModel(h), h, 2.0, Rounding::Upper);
  const auto powers = convolve_powers(base, 3);
  const auto m3 = powers.power(3).masses();
  for (std::size_t k = 0; k < m3.size(); ++k) EXPECT_NEAR(m3[k], k == 3 ? 1.0 : 0.0, 1e-15) << k;
}

TEST(Convolution, TwoPointBinomial) {
  const LatticeDistribution base(1.0, {0.0, 0.5, 0.5, 0.0, 0.0, 0.0, 0.0}, 0.0, Rounding::Upper);
  const auto p3 = convolve_powers(base, 3).power(3);
  // sum of three uniform {1, 2}: values 3..6 with binomial(3, 1/2) weights
  const double expected[] = {0, 0, 0, 0.125, 0.375, 0.375, 0.125};
  for (std::size_t k = 0; k < 7; ++k) EXPECT_NEAR(p3.masses()[k], expected[k], 1e-15) << k;
}

TEST(Convolution, MatchesBruteForce) {
  const auto base = discretize(LognormalModel(0.0, 1.0), 0.05, 40.0, Rounding::Lower);
  const auto powers = convolve_powers(base, 4);
  std::vector<double> ref(base.masses().begin(), base.masses().end());
  for (int n = 2; n <= 4; ++n) {
    ref = brute_convolve(ref, base.masses());
    const auto got = powers.power(n).masses();
    for (std::size_t k = 0; k < ref.size(); ++k) ASSERT_NEAR(got[k], ref[k], 1e-14) << n << ' ' << k;
  }
}

TEST(Convolution, PointwiseTailAgreesWithFullConvolution) {
  const auto base = discretize(ParetoModel(1.0, 2.0), 0.1, 300.0, Rounding::Upper);
  const auto two = convolve(base, base);
  for (long k : {0L, 10L, 25L, 1000L, 2999L, 3000L})
    EXPECT_NEAR(convolution_tail_at_index(base, base, k), two.tail_at_index(k), 1e-13) << k;
}

TEST(Convolution, ParetoTwoFoldBracketsQuadrature) {
  const double h = 0.01;
  const auto pair = discretize_pair(ParetoModel(1.0, 2.0), h, 1000.0);
  const double x = 500.0;
  const long k = pair.upper.bracket_index(x);
  const double hi = convolution_tail_at_index(pair.upper, pair.upper, k);
  const double lo = convolution_tail_at_index(pair.lower, pair.lower, k);
  const double exact = pareto2_two_fold_tail(x);
  EXPECT_LE(lo, exact);
  EXPECT_GE(hi, exact);
  const double tail = std::pow(x, -2.0);
  EXPECT_NEAR(lo / tail, 2.0, 0.05);
  EXPECT_NEAR(hi / tail, 2.0, 0.05);
}

TEST(Convolution, MeanIsAdditive) {
  const ParetoModel m(1.0, 3.0);
  const double h = 0.05;
  const auto pair = discretize_pair(m, h, 500.0);
  const auto up = convolve_powers(pair.upper, 4);
  const auto lo = convolve_powers(pair.lower, 4);
  for (int n = 1; n <= 4; ++n) {
    // the mean carried past 500 is ~ n * 1.5 * 500^-2, well under the slack
    EXPECT_LE(lo.power(n).mean(), n * m.mean() + 1e-9) << n;
    EXPECT_GE(up.power(n).mean(), n * (m.mean() - h) - 1e-2) << n;
    EXPECT_NEAR(up.power(n).mean() - lo.power(n).mean(), n * h, n * h * 0.01) << n;
  }
}

TEST(Convolution, BudgetExceededIsResourceError) {
  const auto base = discretize(ParetoModel(1.0, 2.0), 0.01, 100.0, Rounding::Upper);
  EXPECT_THROW(convolve_powers(base, 10, 1e4), ResourceError);
}

TEST(Compound, DeterministicZeroAndOne) {
  const auto base = discretize(WeibullModel(0.5), 0.1, 100.0, Rounding::Upper);
  const std::vector<double> xs{1.0, 10.0, 50.0};
  for (double v : compound_tail(base, CountModel::deterministic(0), xs)) EXPECT_EQ(v, 0.0);
  const auto one = compound_tail(base, CountModel::deterministic(1), xs);
  for (std::size_t i = 0; i < xs.size(); ++i) EXPECT_NEAR(one[i], base.tail(xs[i]), 1e-15);
}

TEST(Compound, PoissonOnAtomMatchesClosedForm) {
  // severity = h exactly, so the compound value is h * N with N ~ Poisson(lambda)
  const double h = 0.5;
  const double lambda = 1.7;
  const auto base = discretize(PointMassModel(h), h, 20.0, Rounding::Upper);
  const auto c = compound_distribution(base, CountModel::poisson(lambda));
  double p = std::exp(-lambda);
  for (long k = 0; k < 30; ++k) {
    EXPECT_NEAR(c.distribution.masses()[static_cast<std::size_t>(k)], p, 1e-10) << k;
    p *= lambda / static_cast<double>(k + 1);
  }
}

TEST(Compound, PanjerMatchesSeries) {
  const auto base = discretize(ParetoModel(1.0, 2.5), 0.01, 200.0, Rounding::Upper);
  const auto count = CountModel::poisson(1.0);
  const auto panjer = panjer_recursion(base, count);
  const auto series = compound_series(base, count);
  for (std::size_t k = 0; k < base.size(); k += 97)
    EXPECT_NEAR(panjer.distribution.tail_at_index(static_cast<long>(k)),
                series.distribution.tail_at_index(static_cast<long>(k)), 1e-9)
        << k;
}

TEST(Compound, GeometricPanjerMatchesSeries) {
  const auto base = discretize(LognormalModel(0.0, 1.0), 0.05, 100.0, Rounding::Lower);
  const auto count = CountModel::geometric(0.4);
  const auto panjer = panjer_recursion(base, count);
  const auto series = compound_series(base, count);
  for (std::size_t k = 0; k < base.size(); k += 50)
    EXPECT_NEAR(panjer.distribution.masses()[k], series.distribution.masses()[k], 1e-12) << k;
}

TEST(Compound, BracketHoldsForFiniteSupport) {
  const auto pair = discretize_pair(ParetoModel(1.0, 2.0), 0.05, 400.0);
  const auto count = CountModel::finite_support({{0, 0.1}, {1, 0.6}, {3, 0.3}});
  const std::vector<double> xs{5.0, 50.0, 300.0};
  const auto hi = compound_tail(pair.upper, count, xs);
  const auto lo = compound_tail(pair.lower, count, xs);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    EXPECT_LE(lo[i], hi[i]);
    // first-order: 0.6 F(x) + 0.3 * 3 F(x) = 1.5 F(x); x = 5 is pre-asymptotic
    if (xs[i] > 10.0) {
      EXPECT_NEAR(hi[i] / (1.5 * std::pow(xs[i], -2.0)), 1.0, 0.3) << xs[i];
    }
  }
}

TEST(Lattice, CsvDump) {
  const LatticeDistribution d(0.5, {0.25, 0.5, 0.25}, 0.0, Rounding::Upper);
  std::ostringstream os;
  d.write_csv(os);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "k,x,mass,tail");
  std::getline(is, line);
  EXPECT_EQ(line, "0,0,0.25,0.75");
  int rows = 1;
  while (std::getline(is, line)) ++rows;
  EXPECT_EQ(rows, 3);
}
