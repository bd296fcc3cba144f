#include "combodose/dose_models.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "combodose/errors.hpp"

namespace combodose {

double logit(double p) {
  p = std::clamp(p, kProbClamp, 1.0 - kProbClamp);
  return std::log(p) - std::log1p(-p);
}

namespace {

std::vector<double> standardize_axis(std::span<const double> raw, const char* name) {
  if (raw.size() < 2) {
    throw InvalidGrid(std::string("dose grid for ") + name + " needs at least two levels");
  }
  for (std::size_t i = 1; i < raw.size(); ++i) {
    if (!(raw[i] > raw[i - 1])) {
      throw InvalidGrid(std::string("dose grid for ") + name + " must be strictly increasing");
    }
  }
  const double lo = raw.front();
  const double span = raw.back() - lo;
  std::vector<double> out(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) out[i] = (raw[i] - lo) / span;
  out.front() = 0.0;
  out.back() = 1.0;
  return out;
}

void check_dose(double x, double y) {
  if (!(x >= 0.0 && x <= 1.0 && y >= 0.0 && y <= 1.0)) {
    throw DomainError("dose combination (" + std::to_string(x) + ", " + std::to_string(y) +
                      ") is outside [0,1]^2");
  }
}

}  // namespace

StandardDoseGrid standardize_grid(std::span<const double> raw_x, std::span<const double> raw_y) {
  StandardDoseGrid g;
  g.x_levels = standardize_axis(raw_x, "x");
  g.y_levels = standardize_axis(raw_y, "y");
  g.raw_x.assign(raw_x.begin(), raw_x.end());
  g.raw_y.assign(raw_y.begin(), raw_y.end());
  return g;
}

bool ToxicityParams::in_support() const {
  const auto in_unit = [](double v) { return v > 0.0 && v < 1.0; };
  return in_unit(rho00) && in_unit(rho01) && in_unit(rho10) &&
         rho00 <= std::min(rho01, rho10) && eta >= 0.0 && std::isfinite(eta);
}

ToxicityCoefficients toxicity_coefficients(const ToxicityParams& p) {
  const double l00 = logit(p.rho00);
  return {l00, logit(p.rho10) - l00, logit(p.rho01) - l00, p.eta};
}

double toxicity_prob(const ToxicityParams& p, double x, double y) {
  check_dose(x, y);
  return expit(toxicity_coefficients(p).linear_predictor(x, y));
}

bool EfficacyParams::knots_valid() const {
  return knots[0] == 0.0 && knots[3] == 0.0 && knots[1] >= 0.0 && knots[1] < knots[2] &&
         knots[2] <= 1.0 && knots[4] >= 0.0 && knots[4] < knots[5] && knots[5] <= 1.0;
}

double EfficacyParams::x_part(double x) const {
  return beta[0] + beta[1] * x + beta[2] * x * x + beta[3] * truncated_cube(x - knots[0]) +
         beta[4] * truncated_cube(x - knots[1]) + beta[5] * truncated_cube(x - knots[2]);
}

double EfficacyParams::y_part(double y) const {
  return beta[6] * y + beta[7] * y * y + beta[8] * truncated_cube(y - knots[3]) +
         beta[9] * truncated_cube(y - knots[4]) + beta[10] * truncated_cube(y - knots[5]);
}

double efficacy_prob(const EfficacyParams& p, double x, double y) {
  check_dose(x, y);
  if (!p.knots_valid()) {
    throw InvalidParams("efficacy knots must satisfy k1 = k4 = 0, 0 <= k2 < k3 <= 1, 0 <= k5 < k6 <= 1");
  }
  return expit(p.linear_predictor(x, y));
}

void UtilityTradeoff::validate() const {
  std::vector<std::string> bad;
  if (!(theta_T > 0.0 && theta_T < 1.0)) bad.emplace_back("theta_T");
  if (!(eta1 > 0.0)) bad.emplace_back("eta1");
  if (!std::isfinite(eta0)) bad.emplace_back("eta0");
  if (!std::isfinite(eta2)) bad.emplace_back("eta2");
  if (!std::isfinite(eta3)) bad.emplace_back("eta3");
  if (!bad.empty()) throw ConfigError("invalid utility trade-off constants", bad);
}

double utility(double pi_T, double pi_E, const UtilityTradeoff& t) {
  if (!(pi_T >= 0.0 && pi_T <= 1.0 && pi_E >= 0.0 && pi_E <= 1.0)) {
    throw DomainError("utility arguments must be probabilities");
  }
  return utility_unchecked(pi_T, pi_E, t);
}

void DesignConstants::validate() const {
  std::vector<std::string> bad;
  const auto prob = [](double v) { return v > 0.0 && v < 1.0; };
  if (!prob(theta_T)) bad.emplace_back("theta_T");
  if (!prob(theta_E)) bad.emplace_back("theta_E");
  if (!std::isfinite(U0)) bad.emplace_back("U0");
  if (C1 < 1) bad.emplace_back("C1");
  // The alternating two-patient escalation is only defined for pairs.
  if (m1 != 2) bad.emplace_back("m1");
  if (n2 < 1) bad.emplace_back("n2");
  if (C2 < 0) bad.emplace_back("C2");
  if (m2 < 1) bad.emplace_back("m2");
  if (!prob(delta1)) bad.emplace_back("delta1");
  if (!prob(delta2)) bad.emplace_back("delta2");
  if (!(alpha_step > 0.0)) bad.emplace_back("alpha_step");
  if (!(alpha_start > 0.0 && alpha_start <= alpha_stop)) bad.emplace_back("alpha_start");
  if (!(alpha_stop <= 0.5 && alpha_stop >= alpha_start)) bad.emplace_back("alpha_stop");
  if (!bad.empty()) {
    std::string msg = "invalid design constants:";
    for (const auto& f : bad) msg += " " + f;
    if (m1 != 2) msg += " (m1 must equal 2)";
    throw ConfigError(msg, bad);
  }
}

}  // namespace combodose
