#include "combodose/scenario.hpp"

#include <algorithm>
#include <cmath>

#include "combodose/errors.hpp"

namespace combodose {

void Scenario::validate() const {
  std::vector<std::string> bad;
  try {
    tradeoff.validate();
  } catch (const ConfigError& e) {
    bad.insert(bad.end(), e.fields().begin(), e.fields().end());
  }
  if (kind == ScenarioKind::parametric) {
    if (!toxicity.in_support()) bad.emplace_back("toxicity");
    if (!efficacy.knots_valid()) bad.emplace_back("efficacy.knots");
  } else {
    const auto axis_ok = [](const std::vector<double>& v) {
      if (v.size() < 2 || v.front() != 0.0 || v.back() != 1.0) return false;
      return std::adjacent_find(v.begin(), v.end(), std::greater_equal<>()) == v.end();
    };
    if (!axis_ok(x_levels)) bad.emplace_back("x_levels");
    if (!axis_ok(y_levels)) bad.emplace_back("y_levels");
    const std::size_t cells = x_levels.size() * y_levels.size();
    const auto probs_ok = [&](const std::vector<double>& m) {
      return m.size() == cells &&
             std::all_of(m.begin(), m.end(), [](double p) { return p >= 0.0 && p <= 1.0; });
    };
    if (!probs_ok(pi_T)) bad.emplace_back("pi_T");
    if (!probs_ok(pi_E)) bad.emplace_back("pi_E");
  }
  if (!bad.empty()) throw ConfigError("invalid scenario '" + name + "'", bad);
}

namespace {

constexpr double kLevelTol = 1e-12;

int exact_level(const std::vector<double>& levels, double v) {
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (std::abs(levels[i] - v) <= kLevelTol) return static_cast<int>(i);
  }
  return -1;
}

// Lower cell index and weight of the upper neighbour.
std::pair<std::size_t, double> bracket(const std::vector<double>& levels, double v) {
  std::size_t i = 0;
  while (i + 2 < levels.size() && v > levels[i + 1]) ++i;
  const double w = (v - levels[i]) / (levels[i + 1] - levels[i]);
  return {i, std::clamp(w, 0.0, 1.0)};
}

}  // namespace

TruePoint true_surface(const Scenario& sc, double x, double y, bool interpolate) {
  if (!(x >= 0.0 && x <= 1.0 && y >= 0.0 && y <= 1.0)) {
    throw DomainError("dose combination outside [0,1]^2");
  }
  double pt;
  double pe;
  if (sc.kind == ScenarioKind::parametric) {
    pt = toxicity_prob(sc.toxicity, x, y);
    pe = efficacy_prob(sc.efficacy, x, y);
  } else {
    const std::size_t ny = sc.y_levels.size();
    const int i = exact_level(sc.x_levels, x);
    const int j = exact_level(sc.y_levels, y);
    if (i >= 0 && j >= 0) {
      pt = sc.pi_T[i * ny + j];
      pe = sc.pi_E[i * ny + j];
    } else if (!interpolate) {
      throw OffGridError("tabular scenario '" + sc.name + "' is only defined on its dose grid");
    } else {
      const auto [ix, wx] = bracket(sc.x_levels, x);
      const auto [iy, wy] = bracket(sc.y_levels, y);
      const auto bilinear = [&](const std::vector<double>& m) {
        const double v00 = m[ix * ny + iy];
        const double v01 = m[ix * ny + iy + 1];
        const double v10 = m[(ix + 1) * ny + iy];
        const double v11 = m[(ix + 1) * ny + iy + 1];
        return (1 - wx) * ((1 - wy) * v00 + wy * v01) + wx * ((1 - wy) * v10 + wy * v11);
      };
      pt = bilinear(sc.pi_T);
      pe = bilinear(sc.pi_E);
    }
  }
  return {pt, pe, utility(pt, pe, sc.tradeoff)};
}

TargetCombination brute_force_target(const Scenario& sc, int resolution) {
  TargetCombination best{0.0, 0.0, -1.0};
  for (int i = 0; i < resolution; ++i) {
    const double x = static_cast<double>(i) / (resolution - 1);
    for (int j = 0; j < resolution; ++j) {
      const double y = static_cast<double>(j) / (resolution - 1);
      const double u = true_surface(sc, x, y, true).U;
      if (u > best.utility) best = {x, y, u};
    }
  }
  return best;
}

}  // namespace combodose
