#pragma once

// Priors, likelihoods, MCMC fitting of the toxicity and efficacy models, and
// posterior summaries on dose grids.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "combodose/dose_models.hpp"

namespace combodose {

struct PatientRecord {
  double x = 0.0;
  double y = 0.0;
  int z_T = 0;
  int z_E = 0;
  int stage = 1;
  int cohort_index = 1;
};

struct TrialData {
  std::vector<PatientRecord> records;

  int dlt_count() const;
  // Throws InvalidParams on out-of-range doses or non-binary outcomes.
  void validate() const;
};

// Patients pooled by dose combination, in order of first appearance.
struct DoseCell {
  double x;
  double y;
  int n;
  int n_tox;
  int n_eff;
};
std::vector<DoseCell> aggregate(const TrialData& d);

struct McmcConfig {
  int n_burn = 2000;
  int n_keep = 2000;
  int thin = 2;
  int n_chains = 2;
  double target_acceptance = 0.35;
  std::uint64_t seed = 20240601;

  void validate() const;
  // Budget used for the final recommendation.
  McmcConfig doubled() const;
};

// Log prior of the toxicity parameters on the (rho00, rho01, rho10, eta)
// scale: rho01, rho10 ~ Beta(1,1); rho00 / min(rho01, rho10) ~ Beta(1,1);
// eta ~ Gamma(0.1, 0.1). -inf outside the support.
double log_prior_toxicity(const ToxicityParams& p);
double log_likelihood_toxicity(const ToxicityParams& p, std::span<const DoseCell> cells);
double log_posterior_toxicity(const ToxicityParams& p, const TrialData& d);

// beta_r ~ N(0, 10^2) for r = 0..11; (k2, k3) and (k5, k6) uniform on the
// ordered triangle.
double log_prior_efficacy(const EfficacyParams& p);
double log_likelihood_efficacy(const EfficacyParams& p, std::span<const DoseCell> cells);
double log_posterior_efficacy(const EfficacyParams& p, const TrialData& d);

// Unconstrained coordinates used by the sampler.
namespace transform {
inline constexpr int kToxicityDim = 4;
inline constexpr int kEfficacyDim = 16;

// (logit rho01, logit rho10, logit(rho00 / min(rho01, rho10)), log eta)
std::vector<double> toxicity_to_unconstrained(const ToxicityParams& p);
ToxicityParams toxicity_from_unconstrained(std::span<const double> u);
// log |d(rho00, rho01, rho10, eta) / du|
double toxicity_log_jacobian(std::span<const double> u);
// Log posterior density of u; equals log_posterior_toxicity + log jacobian
// but is evaluated without forming the eta^(-0.9) singularity.
double toxicity_log_target(std::span<const double> u, std::span<const DoseCell> cells);

// (beta0..beta11, logit k2, logit((k3 - k2) / (1 - k2)), logit k5, logit((k6 - k5) / (1 - k5)))
std::vector<double> efficacy_to_unconstrained(const EfficacyParams& p);
EfficacyParams efficacy_from_unconstrained(std::span<const double> v);
double efficacy_log_jacobian(std::span<const double> v);
double efficacy_log_target(std::span<const double> v, std::span<const DoseCell> cells);
}  // namespace transform

enum class FitBlocks { toxicity_only, toxicity_and_efficacy };

struct ParameterDiagnostic {
  std::string name;
  double acceptance;  // post-burn-in acceptance of the parameter's block
  double split_rhat;
};

// Posterior draws, chain-major: draw s of chain c sits at c * draws_per_chain + s.
struct ChainSet {
  int n_chains = 1;
  std::vector<ToxicityParams> tox_draws;
  std::vector<EfficacyParams> eff_draws;  // empty for toxicity-only fits
  std::vector<ParameterDiagnostic> diagnostics;

  std::size_t draws_per_chain() const { return tox_draws.size() / n_chains; }
  bool has_efficacy() const { return !eff_draws.empty(); }
  double max_split_rhat() const;
};

// Adaptive random-walk Metropolis on both marginal posteriors. Chains use
// RNG streams derived from (cfg.seed, chain index), so the result does not
// depend on execution order. Throws InitializationFailure if no finite
// starting point is found in 100 prior draws.
ChainSet sample_chains(const TrialData& d, const McmcConfig& cfg,
                       FitBlocks blocks = FitBlocks::toxicity_and_efficacy);

// Gelman-Rubin statistic on chains split in half. `draws` is chain-major.
double split_rhat(std::span<const double> draws, int n_chains);
// Monte-Carlo standard error of the mean by non-overlapping batch means.
double batch_means_se(std::span<const double> draws, int n_batches = 25);

// Header row plus one row per draw.
void write_chainset_table(std::ostream& os, const ChainSet& c);

struct GridCombo {
  int i;  // x level index
  int j;  // y level index
  friend bool operator==(const GridCombo&, const GridCombo&) = default;
};

struct PosteriorSummary {
  int nx = 0;
  int ny = 0;
  // Row-major by x level: entry [i * ny + j].
  std::vector<double> pi_T_hat;
  std::vector<double> pi_E_hat;  // empty without efficacy draws
  std::vector<double> U_hat;     // empty without efficacy draws
  int lattice_resolution = 0;
  std::vector<double> lattice_U_hat;  // [i * R + j] at (i/(R-1), j/(R-1))
  std::vector<GridCombo> safe_set;    // pi_T_hat <= theta_T, in grid order

  bool is_safe(int i, int j) const;
  double U_at(GridCombo c) const { return U_hat[c.i * ny + c.j]; }
};

// Posterior means on the grid. U_hat averages the utility draw by draw.
// lattice_resolution = 0 skips the lattice.
PosteriorSummary summarize_on_grid(const ChainSet& c, const StandardDoseGrid& g,
                                   const UtilityTradeoff& t, int lattice_resolution);

// Posterior-mean utility at one point.
double posterior_mean_utility(const ChainSet& c, const UtilityTradeoff& t, double x, double y);
// Posterior-mean utility on the R x R lattice over [0,1]^2, [i * R + j].
std::vector<double> utility_lattice(const ChainSet& c, const UtilityTradeoff& t, int resolution);

enum class Axis { x, y };

// Per-draw MTD of the free drug with `fixed_axis` held at `fixed_dose`,
// clamped to [0, 1]. A flat draw maps to 1 if it stays at or below theta_T
// and to 0 otherwise.
std::vector<double> conditional_mtd_samples(const ChainSet& c, Axis fixed_axis,
                                            double fixed_dose, double theta_T);
// Empirical alpha-quantile of conditional_mtd_samples.
double conditional_mtd_percentile(const ChainSet& c, Axis fixed_axis, double fixed_dose,
                                  double alpha, double theta_T);

// Inverse empirical CDF: the smallest sample v with #(samples <= v) >= alpha * n.
double empirical_quantile(std::vector<double> samples, double alpha);

}  // namespace combodose
