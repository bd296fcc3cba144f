#pragma once

// Independent reference computations used by the tests. Nothing here calls
// into the library.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace oracle {

// Composite Simpson rule on [a, b] with n (even) intervals.
inline double simpson(const std::function<double(double)>& f, double a, double b, int n) {
  if (n % 2 == 1) ++n;
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += f(a + i * h) * (i % 2 == 1 ? 4.0 : 2.0);
  return s * h / 3.0;
}

// P(Theta > t) for Theta ~ Beta(a, b), a, b >= 1/2. Substituting
// theta = sin^2(phi) removes the endpoint singularities, leaving a smooth
// integrand on [asin(sqrt(t)), pi/2].
inline double beta_upper_tail(double a, double b, double t) {
  const double log_beta = std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
  const auto g = [&](double phi) {
    const double s = std::sin(phi);
    const double c = std::cos(phi);
    if (s <= 0.0 || c <= 0.0) {
      // Endpoint values: the integrand vanishes unless the exponent is zero.
      const double e = s <= 0.0 ? 2 * a - 1 : 2 * b - 1;
      if (std::abs(e) > 1e-15) return 0.0;
      const double other = s <= 0.0 ? (2 * b - 1) * std::log(c) : (2 * a - 1) * std::log(s);
      return 2.0 * std::exp(other - log_beta);
    }
    return 2.0 * std::exp((2 * a - 1) * std::log(s) + (2 * b - 1) * std::log(c) - log_beta);
  };
  return simpson(g, std::asin(std::sqrt(t)), M_PI / 2, 20000);
}

// Inverse empirical CDF by full sort: smallest v with #(<= v) >= p n.
inline double sorted_quantile(std::vector<double> v, double p) {
  std::sort(v.begin(), v.end());
  const double n = static_cast<double>(v.size());
  for (std::size_t k = 1; k <= v.size(); ++k) {
    if (static_cast<double>(k) >= p * n - 1e-9) return v[k - 1];
  }
  return v.back();
}

// Linear interpolation between order statistics at h = (n - 1) p, by sort.
inline double sorted_quantile_type7(std::vector<double> v, double p) {
  std::sort(v.begin(), v.end());
  const double h = (static_cast<double>(v.size()) - 1.0) * p;
  const double lo = std::floor(h);
  const double hi = std::ceil(h);
  return v[static_cast<std::size_t>(lo)] +
         (h - lo) * (v[static_cast<std::size_t>(hi)] - v[static_cast<std::size_t>(lo)]);
}

inline double logistic(double u) { return 1.0 / (1.0 + std::exp(-u)); }
inline double logit(double p) { return std::log(p / (1.0 - p)); }

// Default trade-off evaluated straight from its definition.
inline double utility(double pt, double pe, double theta = 0.3) {
  if (pt > theta) return 0.0;
  return (1.0 - (1.0 - 0.368) * pt / theta) * (0.385 * std::exp(1.28 * pe) - 0.385);
}

}  // namespace oracle
