#pragma once

// Two-stage sequential dose-combination design. Stage I escalates with
// overdose control, moving one drug at a time; stage II spreads an initial
// cohort over the safe combinations and then randomizes adaptively with
// probabilities proportional to the posterior-mean utility. At the end the
// continuous dose combination maximizing the posterior-mean utility is
// recommended.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "combodose/dose_models.hpp"
#include "combodose/posterior.hpp"
#include "combodose/rng.hpp"

namespace combodose {

enum class TrialStatus { active, stopped_safety_stage1, stopped_safety_stage2, completed };

std::string to_string(TrialStatus s);
TrialStatus parse_trial_status(const std::string& s);
inline bool is_stopped(TrialStatus s) {
  return s == TrialStatus::stopped_safety_stage1 || s == TrialStatus::stopped_safety_stage2;
}

struct Assignment {
  int patient = 0;  // 1-based enrollment index
  int x_index = 0;
  int y_index = 0;
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Assignment&, const Assignment&) = default;
};

struct CohortAssignment {
  int stage = 1;
  int cohort = 1;  // cohort number within the stage
  std::vector<Assignment> patients;
  std::optional<double> alpha;  // feasibility bound, stage I cohorts after the first
  friend bool operator==(const CohortAssignment&, const CohortAssignment&) = default;
};

struct Outcome {
  int patient = 0;
  int z_T = 0;
  int z_E = 0;
  friend bool operator==(const Outcome&, const Outcome&) = default;
};

struct Recommendation {
  bool admissible = false;  // false when the utility lattice is zero everywhere
  double x_opt = 0.0;
  double y_opt = 0.0;
  double U_hat = 0.0;
  int lattice_resolution = 0;
  std::vector<double> lattice_U_hat;
};

struct StopEvaluation {
  int stage = 1;
  double probability = 0.0;  // posterior probability of excess toxicity
  double threshold = 0.0;    // delta for the stage
  bool stop = false;
  friend bool operator==(const StopEvaluation&, const StopEvaluation&) = default;
};

// min(alpha_start + alpha_step (c1 - 1), alpha_stop); 0.25 -> 0.5 by 0.05 by default.
double feasibility_alpha(int c1, const DesignConstants& k = {});

// P(pi_T(0,0) > theta_T + 0.1 | data) estimated from the draws.
double stage1_overdose_probability(const ChainSet& c, double theta_T);
bool stage1_safety_stop(const ChainSet& c, double theta_T, double delta1);

// P(Theta > theta_T + 0.1) with Theta ~ Beta(0.5 + n_dlt, 0.5 + n - n_dlt).
double stage2_overdose_probability(int n_dlt, int n, double theta_T);
bool stage2_safety_stop(int n_dlt, int n, double theta_T, double delta2);

// Index of the level closest to v; ties go to the lower level.
int nearest_level(std::span<const double> levels, double v);

struct TrialState {
  TrialData data;
  StandardDoseGrid grid;
  DesignConstants constants;
  UtilityTradeoff tradeoff;
  int stage = 1;
  int cohort1 = 0;  // stage I cohorts with recorded outcomes
  int cohort2 = 0;  // stage II cohorts with recorded outcomes
  std::vector<Assignment> assignments;  // every enrolled patient, in order
  std::vector<bool> tried_x;
  std::vector<bool> tried_y;
  TrialStatus status = TrialStatus::active;
  bool no_admissible_dose = false;

  int enrolled() const { return static_cast<int>(data.records.size()); }
  int highest_tried_x() const;
  int highest_tried_y() const;
};

// Assignment for stage I cohort s.cohort1 + 1. The first cohort starts both
// patients at the lowest combination; later cohorts move one drug per
// patient to the grid level nearest the alpha-quantile of its conditional
// MTD, never more than one level above the highest level tried.
CohortAssignment stage1_assign(const TrialState& s, const ChainSet& c);

// Spreads n2 patients over the safe set, covering as many combinations as
// possible. Throws NoAdmissibleDose if the safe set is empty.
CohortAssignment stage2_initial_allocation(const TrialState& s, const PosteriorSummary& ps,
                                           Rng& rng);

// pi_AR over ps.safe_set; uniform when every U_hat is zero.
std::vector<double> ar_probabilities(const PosteriorSummary& ps);

// m2 independent draws from pi_AR. Patients are numbered from first_patient.
// Throws NoAdmissibleDose if the safe set is empty.
CohortAssignment stage2_ar_assign(const PosteriorSummary& ps, const StandardDoseGrid& g,
                                  int m2, int first_patient, int cohort, Rng& rng);

// Lattice argmax of the posterior-mean utility, refined by a compass search
// starting at the lattice spacing and halving six times. Ties on the lattice
// go to the smallest x, then the smallest y.
Recommendation recommend_optimal(const ChainSet& c, const UtilityTradeoff& t, int resolution);

struct TrialOptions {
  int lattice_resolution = 101;
  // Stage I decisions only read the toxicity draws; live sessions also fit
  // efficacy so posterior heatmaps are available from the first cohort.
  bool fit_efficacy_in_stage1 = false;
  // Lattice attached to interim summaries (0 = none).
  int summary_lattice_resolution = 0;
};

// One record per cohort: what was assigned, what was observed, and what the
// design decided afterwards.
struct CohortEvent {
  int stage = 1;
  int cohort = 1;
  std::optional<double> alpha;
  std::vector<Assignment> assignments;
  std::vector<Outcome> outcomes;
  std::uint64_t fit_seed = 0;
  std::optional<StopEvaluation> stop_rule;
  TrialStatus status = TrialStatus::active;
  bool no_admissible_dose = false;
  std::optional<Recommendation> recommendation;  // lattice omitted
  std::uint64_t next_allocation_seed = 0;        // 0 if no randomized allocation followed
};

class Trial {
 public:
  Trial(StandardDoseGrid grid, DesignConstants constants, UtilityTradeoff tradeoff,
        McmcConfig mcmc, std::uint64_t seed, TrialOptions options = {});

  const TrialState& state() const { return state_; }
  const std::optional<CohortAssignment>& pending() const { return pending_; }
  const std::vector<CohortEvent>& events() const { return events_; }
  const std::optional<ChainSet>& chains() const { return chains_; }
  const std::optional<PosteriorSummary>& summary() const { return summary_; }
  const std::optional<Recommendation>& recommendation() const { return recommendation_; }
  const McmcConfig& mcmc() const { return mcmc_; }
  std::uint64_t seed() const { return seed_; }

  // Records the outcomes of the pending cohort, refits, applies the stopping
  // rule and prepares the next assignment or the recommendation. Outcomes
  // must cover exactly the pending patients. Throws StateError when no
  // cohort is pending and InvalidParams on mismatched or non-binary outcomes.
  const CohortEvent& record(std::span<const Outcome> outcomes);

 private:
  ChainSet fit(bool with_efficacy, bool final_fit);
  void enter_stage2(CohortEvent& ev);

  TrialState state_;
  McmcConfig mcmc_;
  std::uint64_t seed_;
  TrialOptions options_;
  int fits_ = 0;
  std::optional<CohortAssignment> pending_;
  std::vector<CohortEvent> events_;
  std::optional<ChainSet> chains_;
  std::optional<PosteriorSummary> summary_;
  std::optional<Recommendation> recommendation_;
};

}  // namespace combodose
