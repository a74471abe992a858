#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "subexp/errors.hpp"

namespace subexp {

/// Neumaier's variant of Kahan summation.
class CompensatedSum {
 public:
  void add(double v) noexcept {
    const double t = sum_ + v;
    if (std::fabs(sum_) >= std::fabs(v)) {
      comp_ += (sum_ - t) + v;
    } else {
      comp_ += (v - t) + sum_;
    }
    sum_ = t;
  }
  CompensatedSum& operator+=(double v) noexcept {
    add(v);
    return *this;
  }
  double value() const noexcept { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

inline double compensated_sum(std::span<const double> values) {
  CompensatedSum s;
  for (double v : values) s += v;
  return s.value();
}

namespace detail {

inline constexpr std::size_t kDotBlock = 256;

// Plain block sum; the compiler vectorizes this.
inline double dot_block(const double* a, const double* b, std::size_t n) noexcept {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

}  // namespace detail

/// Dot product of two nonnegative-or-otherwise arrays: short plain blocks,
/// compensated accumulation across blocks.
inline double dot(const double* a, const double* b, std::size_t n) noexcept {
  if (n <= detail::kDotBlock) return detail::dot_block(a, b, n);
  CompensatedSum s;
  for (std::size_t i = 0; i < n; i += detail::kDotBlock) {
    const std::size_t len = (n - i < detail::kDotBlock) ? n - i : detail::kDotBlock;
    s += detail::dot_block(a + i, b + i, len);
  }
  return s.value();
}

/// Geometric grid x_min, x_min*ratio, ... up to and including x_max (with a
/// small relative slack so that e.g. 10 * (10^(1/8))^16 still lands on 1000).
inline std::vector<double> geometric_grid(double x_min, double x_max, double ratio) {
  if (!(x_min > 0.0)) throw ConfigError("grid.x_min", "must be > 0");
  if (!(x_max >= x_min)) throw ConfigError("grid.x_max", "must be >= grid.x_min");
  if (!(ratio > 1.0)) throw ConfigError("grid.ratio", "must be > 1");
  std::vector<double> xs;
  const double log_ratio = std::log(ratio);
  for (int k = 0;; ++k) {
    const double x = x_min * std::exp(k * log_ratio);
    if (x > x_max * (1.0 + 1e-9)) break;
    xs.push_back(x);
  }
  return xs;
}

/// Default geometric ratio of diagnostic grids: eight points per decade.
inline const double kEighthDecade = std::pow(10.0, 1.0 / 8.0);

}  // namespace subexp
