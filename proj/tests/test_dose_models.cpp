#include <doctest.h>

#include <cmath>
#include <functional>
#include <random>

#include "combodose/dose_models.hpp"
#include "combodose/errors.hpp"
#include "oracles.hpp"

using namespace combodose;

TEST_CASE("standardize_grid maps raw doses onto [0,1]") {
  const std::vector<double> raw{10, 20, 30, 40};
  const std::vector<double> two{0, 1};
  const auto g = standardize_grid(raw, two);
  CHECK(g.x_levels[0] == 0.0);
  CHECK(g.x_levels[1] == doctest::Approx(1.0 / 3).epsilon(1e-15));
  CHECK(g.x_levels[2] == doctest::Approx(2.0 / 3).epsilon(1e-15));
  CHECK(g.x_levels[3] == 1.0);
  CHECK(g.y_levels == std::vector<double>{0.0, 1.0});
  CHECK(g.raw_x == raw);

  const std::vector<double> dup{5, 5, 6};
  const std::vector<double> one{1};
  CHECK_THROWS_AS(standardize_grid(dup, two), InvalidGrid);
  CHECK_THROWS_AS(standardize_grid(one, two), InvalidGrid);
  CHECK_THROWS_AS(standardize_grid(two, std::vector<double>{3, 2}), InvalidGrid);
}

TEST_CASE("toxicity_prob examples") {
  const ToxicityParams p{0.05, 0.3, 0.4, 0.0};
  CHECK(toxicity_prob(p, 0, 0) == doctest::Approx(0.05).epsilon(1e-14));
  CHECK(toxicity_prob(p, 1, 0) == doctest::Approx(0.40).epsilon(1e-14));
  CHECK(toxicity_prob(p, 0, 1) == doctest::Approx(0.30).epsilon(1e-14));
  const double expected =
      oracle::logistic(oracle::logit(0.4) + oracle::logit(0.3) - oracle::logit(0.05));
  CHECK(toxicity_prob(p, 1, 1) == doctest::Approx(expected).epsilon(1e-14));
  CHECK(toxicity_prob(p, 1, 1) == doctest::Approx(0.8444).epsilon(1e-4));
  CHECK_THROWS_AS(toxicity_prob(p, 1.1, 0), DomainError);
  CHECK_THROWS_AS(toxicity_prob(p, 0, -0.01), DomainError);
}

TEST_CASE("toxicity_prob corner identities and monotonicity over random parameters") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.001, 0.999);
  std::uniform_real_distribution<double> e(0.0, 5.0);
  for (int k = 0; k < 2000; ++k) {
    ToxicityParams p;
    p.rho01 = u(rng);
    p.rho10 = u(rng);
    p.rho00 = std::min(p.rho01, p.rho10) * u(rng);
    p.eta = e(rng);
    CHECK(std::abs(toxicity_prob(p, 0, 0) - p.rho00) < 1e-12);
    CHECK(std::abs(toxicity_prob(p, 1, 0) - p.rho10) < 1e-12);
    CHECK(std::abs(toxicity_prob(p, 0, 1) - p.rho01) < 1e-12);
    double x1 = u(rng), x2 = u(rng), y = u(rng);
    if (x1 > x2) std::swap(x1, x2);
    CHECK(toxicity_prob(p, x1, y) <= toxicity_prob(p, x2, y));
    CHECK(toxicity_prob(p, y, x1) <= toxicity_prob(p, y, x2));
  }
}

TEST_CASE("efficacy_prob examples") {
  EfficacyParams p;
  p.beta.fill(0.0);
  CHECK(efficacy_prob(p, 0.3, 0.8) == 0.5);

  p.beta[3] = 1.0;
  CHECK(efficacy_prob(p, 0.5, 0.123) == doctest::Approx(oracle::logistic(0.125)).epsilon(1e-15));
  CHECK(efficacy_prob(p, 0.5, 0.9) == doctest::Approx(0.53121).epsilon(1e-5));

  p.beta.fill(0.0);
  p.beta[4] = 1.0;
  p.knots[1] = 0.7;
  p.knots[2] = 0.9;
  CHECK(efficacy_prob(p, 0.5, 0.5) == 0.5);

  p.knots[1] = 0.95;  // k2 > k3
  CHECK_THROWS_AS(efficacy_prob(p, 0.5, 0.5), InvalidParams);
  p.knots[1] = 0.2;
  p.knots[0] = 0.1;  // k1 must be 0
  CHECK_THROWS_AS(efficacy_prob(p, 0.5, 0.5), InvalidParams);
  p.knots[0] = 0.0;
  CHECK_THROWS_AS(efficacy_prob(p, 0.5, 1.5), DomainError);
}

TEST_CASE("truncated power term is closed at the knot") {
  CHECK(truncated_cube(0.0) == 0.0);
  CHECK(truncated_cube(-0.5) == 0.0);
  CHECK(truncated_cube(0.5) == 0.125);
}

namespace {

// One-sided derivatives at t from samples t + s*k*e, k = 0..3 (s = +1 right,
// -1 left). The stencils are exact for cubics, so on a cubic spline the left
// and right values agree at a knot exactly when the spline is C1 / C2 there.
struct OneSided {
  double d1;
  double d2;
};

OneSided one_sided(const std::function<double(double)>& f, double t, double e, int s) {
  const double f0 = f(t), f1 = f(t + s * e), f2 = f(t + 2 * s * e), f3 = f(t + 3 * s * e);
  return {s * (-11 * f0 + 18 * f1 - 9 * f2 + 2 * f3) / (6 * e),
          (2 * f0 - 5 * f1 + 4 * f2 - f3) / (e * e)};
}

double max_knot_mismatch(const std::function<double(double)>& f, double knot, double e) {
  const auto l = one_sided(f, knot, e, -1);
  const auto r = one_sided(f, knot, e, +1);
  return std::max(std::abs(l.d1 - r.d1), std::abs(l.d2 - r.d2));
}

}  // namespace

TEST_CASE("efficacy spline is C2 across every knot") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n(0.0, 3.0);
  std::uniform_real_distribution<double> u(0.1, 0.9);
  const double eps = 1e-3;
  for (int trial = 0; trial < 500; ++trial) {
    EfficacyParams p;
    for (double& b : p.beta) b = n(rng);
    double a = u(rng), b = u(rng);
    if (a > b) std::swap(a, b);
    if (b - a < 0.05) b = std::min(a + 0.05, 0.95);
    p.knots = {0.0, a, b, 0.0, 0.5 * a, 0.5 * (a + b)};
    REQUIRE(p.knots_valid());
    const double y0 = u(rng);
    const double x0 = u(rng);
    const auto fx = [&](double x) { return p.linear_predictor(x, y0); };
    const auto fy = [&](double y) { return p.linear_predictor(x0, y); };
    for (int k : {1, 2}) CHECK(max_knot_mismatch(fx, p.knots[k], eps) < 1e-4);
    for (int k : {4, 5}) CHECK(max_knot_mismatch(fy, p.knots[k], eps) < 1e-4);
  }
}

TEST_CASE("the knot check detects a spline that is only C1") {
  const auto f = [](double x) { return x > 0.4 ? (x - 0.4) * (x - 0.4) : 0.0; };
  CHECK(max_knot_mismatch(f, 0.4, 1e-3) > 1.0);
}

TEST_CASE("utility anchors with the default trade-off") {
  const UtilityTradeoff t;
  CHECK(std::abs(utility(0.0, 0.0, t)) < 1e-15);
  CHECK(utility(0.31, 1.0, t) == 0.0);
  CHECK(std::abs(utility(0.0, 1.0, t) - 0.99971) < 1e-5);
  CHECK(std::abs(utility(0.0, 1.0, t) - (0.385 * std::exp(1.28) - 0.385)) < 1e-12);
  CHECK(std::abs(utility(0.3, 1.0, t) - 0.368 * (0.385 * std::exp(1.28) - 0.385)) < 1e-12);
  CHECK(utility(0.3, 1.0, t) == doctest::Approx(0.36789).epsilon(1e-4));
  CHECK_THROWS_AS(utility(1.2, 0.5, t), DomainError);
  CHECK_THROWS_AS(utility(0.2, -0.1, t), DomainError);
}

TEST_CASE("utility monotonicity and the toxicity cut-off") {
  const UtilityTradeoff t;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < 5000; ++k) {
    const double pe = u(rng);
    double a = u(rng) * t.theta_T, b = u(rng) * t.theta_T;
    if (a > b) std::swap(a, b);
    CHECK(utility(a, pe, t) >= utility(b, pe, t));
    const double pt = u(rng) * t.theta_T;
    double e1 = u(rng), e2 = u(rng);
    if (e1 > e2) std::swap(e1, e2);
    if (e1 < e2) CHECK(utility(pt, e1, t) < utility(pt, e2, t));
    const double over = t.theta_T + (1 - t.theta_T) * u(rng) + 1e-12;
    if (over <= 1.0) CHECK(utility(over, pe, t) == 0.0);
    CHECK(utility(pt, pe, t) == doctest::Approx(oracle::utility(pt, pe)).epsilon(1e-13));
  }
}

TEST_CASE("model evaluations are pure") {
  const ToxicityParams p{0.03, 0.2, 0.25, 1.3};
  EfficacyParams e;
  e.beta = {0.1, -0.4, 2.0, 1.0, -3.0, 0.5, 1.2, -0.7, 0.3, 0.2, -1.0, 0.9};
  for (int k = 0; k < 3; ++k) {
    CHECK(toxicity_prob(p, 0.37, 0.81) == toxicity_prob(p, 0.37, 0.81));
    CHECK(efficacy_prob(e, 0.37, 0.81) == efficacy_prob(e, 0.37, 0.81));
  }
}

TEST_CASE("stable logit and expit round-trip near the boundaries") {
  for (double p : {1e-12, 1e-9, 1e-6, 0.3, 0.5, 1 - 1e-6, 1 - 1e-9}) {
    CHECK(expit(logit(p)) == doctest::Approx(p).epsilon(1e-9));
  }
  CHECK(std::isfinite(logit(0.0)));
  CHECK(std::isfinite(logit(1.0)));
  CHECK(log_expit(-800.0) == doctest::Approx(-800.0));
  CHECK(log_expit(800.0) == 0.0);
}

TEST_CASE("design constants validation") {
  DesignConstants k;
  CHECK_NOTHROW(k.validate());
  CHECK(k.N1() == 30);
  CHECK(k.N2() == 66);
  CHECK(k.N() == 96);
  k.m1 = 3;
  try {
    k.validate();
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("m1 must equal 2") != std::string::npos);
    CHECK(e.fields() == std::vector<std::string>{"m1"});
  }
  k = {};
  k.alpha_stop = 0.6;
  CHECK_THROWS_AS(k.validate(), ConfigError);
  k = {};
  k.delta2 = 1.0;
  CHECK_THROWS_AS(k.validate(), ConfigError);
  UtilityTradeoff t;
  t.theta_T = 1.5;
  CHECK_THROWS_AS(t.validate(), ConfigError);
}
