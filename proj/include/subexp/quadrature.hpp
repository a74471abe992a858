#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace subexp {

struct QuadratureResult {
  double value = 0.0;
  double error = 0.0;  // absolute error estimate

  double relative_error() const {
    return value == 0.0 ? error : error / std::fabs(value);
  }
};

/// Adaptive Gauss-Kronrod over [a, b], split at every breakpoint strictly
/// inside the interval. Integrands with jumps or kinks must pass them here.
template <class F>
QuadratureResult integrate(F&& f, double a, double b, std::vector<double> breaks = {},
                           double rel_tol = 1e-13) {
  QuadratureResult out;
  if (!(b > a)) return out;
  breaks.erase(std::remove_if(breaks.begin(), breaks.end(),
                              [&](double p) { return !(p > a && p < b); }),
               breaks.end());
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
  breaks.insert(breaks.begin(), a);
  breaks.push_back(b);
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    // Each panel is mapped onto [0, 1]: Boost reports leaf errors in
    // unscaled units, so narrow panels would otherwise never meet rel_tol.
    const double lo = breaks[i];
    const double w = breaks[i + 1] - lo;
    auto g = [&f, lo, w](double u) { return w * f(lo + w * u); };
    double err = 0.0;
    const double v = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(g, 0.0, 1.0, 20, rel_tol, &err);
    out.value += v;
    out.error += err;
  }
  return out;
}

/// Integral of f over [a, inf) for smooth, decaying integrands.
template <class F>
QuadratureResult integrate_to_infinity(F&& f, double a, double rel_tol = 1e-12) {
  boost::math::quadrature::exp_sinh<double> integrator;
  QuadratureResult out;
  out.value = integrator.integrate([&](double u) { return f(a + u); }, rel_tol, &out.error);
  return out;
}

}  // namespace subexp
