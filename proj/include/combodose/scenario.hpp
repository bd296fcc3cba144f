#pragma once

// Ground-truth dose-response surfaces used to simulate trials.

#include <optional>
#include <string>
#include <vector>

#include "combodose/dose_models.hpp"

namespace combodose {

enum class ScenarioKind { parametric, tabular };

struct TargetCombination {
  double x = 0.0;
  double y = 0.0;
  double utility = 0.0;
};

struct Scenario {
  std::string name;
  std::string description;
  ScenarioKind kind = ScenarioKind::parametric;
  // parametric truth
  ToxicityParams toxicity;
  EfficacyParams efficacy;
  // tabular truth on standardized levels, row-major by x level: [i * ny + j]
  std::vector<double> x_levels;
  std::vector<double> y_levels;
  std::vector<double> pi_T;
  std::vector<double> pi_E;
  UtilityTradeoff tradeoff;
  // Target dose combination recorded in the scenario file.
  std::optional<TargetCombination> documented_target;

  // Throws ConfigError naming the offending fields.
  void validate() const;
};

struct TruePoint {
  double pi_T;
  double pi_E;
  double U;
};

// Truth at (x, y). Tabular scenarios are defined on their grid only: off-grid
// queries throw OffGridError unless `interpolate` is set, in which case the
// probability matrices are interpolated bilinearly.
TruePoint true_surface(const Scenario& sc, double x, double y, bool interpolate = false);

// Maximizer of the true utility over a resolution x resolution lattice on
// [0,1]^2 (bilinear truth for tabular scenarios). Ties go to the smallest x,
// then the smallest y.
TargetCombination brute_force_target(const Scenario& sc, int resolution = 1001);

}  // namespace combodose
