#pragma once

// Monte-Carlo evaluation of the design against known truths.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "combodose/scenario.hpp"
#include "combodose/trial_engine.hpp"

namespace combodose {

struct SimulationDesign {
  StandardDoseGrid grid;
  DesignConstants constants;
  UtilityTradeoff tradeoff;
  McmcConfig mcmc;
  int lattice_resolution = 101;
};

struct TrialResult {
  std::uint64_t seed = 0;
  TrialStatus status = TrialStatus::active;
  bool no_admissible_dose = false;
  std::optional<Recommendation> recommendation;  // lattice dropped
  std::vector<PatientRecord> records;
  int dlt_count = 0;
  // Scored on the scenario truth; 0 when nothing is recommended.
  double recommended_true_utility = 0.0;
  std::vector<double> ar_true_utilities;
  std::vector<CohortEvent> events;
};

std::uint64_t trial_seed(std::uint64_t master_seed, std::size_t index);

// Runs one trial, drawing each patient's toxicity and efficacy outcomes
// from the scenario truth at the assigned combination.
TrialResult simulate_trial(const Scenario& sc, const SimulationDesign& design, std::uint64_t seed);

// Trials 0..n-1 with seeds trial_seed(master_seed, i); output order and
// content do not depend on `workers`.
std::vector<TrialResult> replicate(const Scenario& sc, const SimulationDesign& design,
                                   int n_trials, std::uint64_t master_seed, int workers = 1);

// What scoring needs from one trial. Everything else is recomputed from the
// scenario truth.
struct TrialRow {
  int trial = 0;
  std::uint64_t seed = 0;
  TrialStatus status = TrialStatus::active;
  int enrolled = 0;
  int dlt_count = 0;
  bool has_recommendation = false;
  double x_opt = 0.0;
  double y_opt = 0.0;
  double U_hat_opt = 0.0;
  std::vector<std::pair<double, double>> ar_doses;
};

TrialRow to_row(const TrialResult& r, int trial);
// Rebuilds the row from the trial's event log alone.
TrialRow row_from_events(std::span<const CohortEvent> events, int trial, std::uint64_t seed);

struct UtilitySummary {
  int n = 0;
  double mean = 0.0;
  double median = 0.0;
  double p025 = 0.0;
  double p975 = 0.0;
};

struct OperatingCharacteristics {
  int n_trials = 0;
  double avg_dlt_rate = 0.0;
  double pct_trials_dlt_above_thetaT = 0.0;
  double pct_trials_dlt_above_thetaT_plus_10 = 0.0;
  double pct_early_stop = 0.0;
  double pct_stop_stage1 = 0.0;
  double pct_stop_stage2 = 0.0;
  UtilitySummary recommended_true_utility;
  int n_ar_patients = 0;
  double avg_ar_true_utility = 0.0;
};

// Sample quantile with linear interpolation between order statistics
// (h = (n - 1) p).
double interpolated_quantile(std::vector<double> v, double p);

// Throws InvalidParams on empty input.
OperatingCharacteristics operating_characteristics(std::span<const TrialRow> rows,
                                                   const Scenario& sc);

}  // namespace combodose
