#pragma once

// Marginal dose-toxicity and dose-efficacy models for a two-drug
// combination, dose standardization, and the toxicity/efficacy utility.

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace combodose {

// Probabilities are kept this far away from {0, 1} before taking logits.
inline constexpr double kProbClamp = 1e-12;

double logit(double p);

inline double expit(double u) {
  if (u >= 0.0) return 1.0 / (1.0 + std::exp(-u));
  const double e = std::exp(u);
  return e / (1.0 + e);
}

// log(expit(u)) without overflow or cancellation.
inline double log_expit(double u) {
  if (u >= 0.0) return -std::log1p(std::exp(-u));
  return u - std::log1p(std::exp(u));
}

struct StandardDoseGrid {
  std::vector<double> x_levels;
  std::vector<double> y_levels;
  std::vector<double> raw_x;
  std::vector<double> raw_y;

  std::size_t nx() const { return x_levels.size(); }
  std::size_t ny() const { return y_levels.size(); }
  std::size_t size() const { return nx() * ny(); }
};

// Maps each compound's increasing raw doses affinely onto [0, 1].
// Throws InvalidGrid on fewer than two levels or non-increasing input.
StandardDoseGrid standardize_grid(std::span<const double> raw_x,
                                  std::span<const double> raw_y);

// Toxicity model on the clinician scale: rho_uv is the DLT probability at
// standardized doses (u, v) for u, v in {0, 1}; eta is the synergy term.
struct ToxicityParams {
  double rho00 = 0.05;
  double rho01 = 0.3;
  double rho10 = 0.3;
  double eta = 0.0;

  bool in_support() const;
};

// Linear-predictor coefficients implied by ToxicityParams.
struct ToxicityCoefficients {
  double a0;
  double a1;
  double a2;
  double eta;

  double linear_predictor(double x, double y) const {
    return (a0 + a1 * x) + (a2 + eta * x) * y;
  }
};

ToxicityCoefficients toxicity_coefficients(const ToxicityParams& p);

// F(a0 + a1 x + a2 y + eta x y). Throws DomainError outside [0,1]^2.
double toxicity_prob(const ToxicityParams& p, double x, double y);

// Truncated-power cubic spline in each dose plus a product term:
//   b0 + b1 x + b2 x^2 + sum_{i=3..5} b_i (x - k_{i-2})_+^3
//      + b6 y + b7 y^2 + sum_{j=8..10} b_j (y - k_{j-4})_+^3 + b11 x y
// knots = (k1..k6) with k1 = k4 = 0.
struct EfficacyParams {
  std::array<double, 12> beta{};
  std::array<double, 6> knots{0.0, 1.0 / 3.0, 2.0 / 3.0, 0.0, 1.0 / 3.0, 2.0 / 3.0};

  bool knots_valid() const;
  // Terms depending on x only (including b0) and on y only.
  double x_part(double x) const;
  double y_part(double y) const;
  double linear_predictor(double x, double y) const {
    return x_part(x) + y_part(y) + beta[11] * x * y;
  }
};

// (u)_+^3, zero at u = 0.
inline double truncated_cube(double u) { return u > 0.0 ? u * u * u : 0.0; }

// Throws DomainError outside [0,1]^2 and InvalidParams on bad knots.
double efficacy_prob(const EfficacyParams& p, double x, double y);

struct UtilityTradeoff {
  double eta0 = 0.368;
  double eta1 = 0.385;
  double eta2 = 1.28;
  double eta3 = -0.385;
  double theta_T = 0.3;

  void validate() const;
};

// 1(pi_T <= theta_T) (1 - (1 - eta0) pi_T / theta_T) (eta1 exp(eta2 pi_E) + eta3).
double utility(double pi_T, double pi_E, const UtilityTradeoff& t);

// Same formula without argument checks; used in posterior averaging loops.
inline double utility_unchecked(double pi_T, double pi_E,
                                const UtilityTradeoff& t) {
  if (pi_T > t.theta_T) return 0.0;
  return (1.0 - (1.0 - t.eta0) * pi_T / t.theta_T) *
         (t.eta1 * std::exp(t.eta2 * pi_E) + t.eta3);
}

struct DesignConstants {
  double theta_T = 0.3;
  // Stored for reporting; no algorithmic step reads theta_E or U0.
  double theta_E = 0.2;
  double U0 = 0.1;
  int C1 = 15;
  int m1 = 2;
  int n2 = 12;
  int C2 = 9;
  int m2 = 6;
  double delta1 = 0.5;
  double delta2 = 0.7;
  double alpha_start = 0.25;
  double alpha_stop = 0.5;
  double alpha_step = 0.05;

  int N1() const { return C1 * m1; }
  int N2() const { return n2 + C2 * m2; }
  int N() const { return N1() + N2(); }
  // Throws ConfigError naming every offending field.
  void validate() const;
};

}  // namespace combodose
