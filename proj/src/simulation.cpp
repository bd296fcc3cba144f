#include "combodose/simulation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>

#include <boost/random/uniform_01.hpp>

#include "combodose/errors.hpp"

namespace combodose {

std::uint64_t trial_seed(std::uint64_t master_seed, std::size_t index) {
  return derive_seed(master_seed, tag(Stream::trial), index);
}

namespace {

bool is_ar_patient(int stage, int cohort) { return stage == 2 && cohort >= 2; }

}  // namespace

TrialResult simulate_trial(const Scenario& sc, const SimulationDesign& design, std::uint64_t seed) {
  TrialOptions opts;
  opts.lattice_resolution = design.lattice_resolution;
  Trial trial(design.grid, design.constants, design.tradeoff, design.mcmc, seed, opts);
  Rng outcome_rng = make_rng(derive_seed(seed, tag(Stream::outcomes)));
  boost::random::uniform_01<double> unif;

  while (trial.state().status == TrialStatus::active && trial.pending()) {
    std::vector<Outcome> outcomes;
    for (const auto& a : trial.pending()->patients) {
      const auto truth = true_surface(sc, a.x, a.y);
      const int z_t = unif(outcome_rng) < truth.pi_T ? 1 : 0;
      const int z_e = unif(outcome_rng) < truth.pi_E ? 1 : 0;
      outcomes.push_back({a.patient, z_t, z_e});
    }
    trial.record(outcomes);
  }

  TrialResult r;
  r.seed = seed;
  r.status = trial.state().status;
  r.no_admissible_dose = trial.state().no_admissible_dose;
  r.records = trial.state().data.records;
  r.dlt_count = trial.state().data.dlt_count();
  if (trial.recommendation()) {
    Recommendation brief = *trial.recommendation();
    brief.lattice_U_hat.clear();
    brief.lattice_U_hat.shrink_to_fit();
    r.recommendation = brief;
    if (brief.admissible) {
      r.recommended_true_utility = true_surface(sc, brief.x_opt, brief.y_opt, true).U;
    }
  }
  for (const auto& rec : r.records) {
    if (is_ar_patient(rec.stage, rec.cohort_index)) {
      r.ar_true_utilities.push_back(true_surface(sc, rec.x, rec.y).U);
    }
  }
  r.events = trial.events();
  return r;
}

std::vector<TrialResult> replicate(const Scenario& sc, const SimulationDesign& design,
                                   int n_trials, std::uint64_t master_seed, int workers) {
  if (n_trials < 1) throw InvalidParams("need at least one trial");
  std::vector<TrialResult> results(static_cast<std::size_t>(n_trials));
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  const auto work = [&] {
    for (int i = next++; i < n_trials; i = next++) {
      try {
        results[i] = simulate_trial(sc, design, trial_seed(master_seed, i));
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const int n_workers = std::clamp(workers, 1, n_trials);
  if (n_workers == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (int w = 0; w < n_workers; ++w) pool.emplace_back(work);
  }
  if (failure) std::rethrow_exception(failure);
  return results;
}

TrialRow to_row(const TrialResult& r, int trial) {
  TrialRow row;
  row.trial = trial;
  row.seed = r.seed;
  row.status = r.status;
  row.enrolled = static_cast<int>(r.records.size());
  row.dlt_count = r.dlt_count;
  if (r.recommendation && r.recommendation->admissible) {
    row.has_recommendation = true;
    row.x_opt = r.recommendation->x_opt;
    row.y_opt = r.recommendation->y_opt;
    row.U_hat_opt = r.recommendation->U_hat;
  }
  for (const auto& rec : r.records) {
    if (is_ar_patient(rec.stage, rec.cohort_index)) row.ar_doses.emplace_back(rec.x, rec.y);
  }
  return row;
}

TrialRow row_from_events(std::span<const CohortEvent> events, int trial, std::uint64_t seed) {
  TrialRow row;
  row.trial = trial;
  row.seed = seed;
  for (const auto& e : events) {
    for (const auto& o : e.outcomes) row.dlt_count += o.z_T;
    row.enrolled += static_cast<int>(e.assignments.size());
    if (is_ar_patient(e.stage, e.cohort)) {
      for (const auto& a : e.assignments) row.ar_doses.emplace_back(a.x, a.y);
    }
    row.status = e.status;
    if (e.recommendation && e.recommendation->admissible) {
      row.has_recommendation = true;
      row.x_opt = e.recommendation->x_opt;
      row.y_opt = e.recommendation->y_opt;
      row.U_hat_opt = e.recommendation->U_hat;
    }
  }
  return row;
}

double interpolated_quantile(std::vector<double> v, double p) {
  if (v.empty()) throw InvalidParams("quantile of an empty sample");
  std::sort(v.begin(), v.end());
  const double h = (static_cast<double>(v.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

OperatingCharacteristics operating_characteristics(std::span<const TrialRow> rows,
                                                   const Scenario& sc) {
  if (rows.empty()) throw InvalidParams("no trials");
  const double theta = sc.tradeoff.theta_T;
  OperatingCharacteristics oc;
  oc.n_trials = static_cast<int>(rows.size());
  const double n = static_cast<double>(rows.size());
  double rate_sum = 0.0;
  int above = 0;
  int above10 = 0;
  int stop1 = 0;
  int stop2 = 0;
  std::vector<double> rec_utils;
  double ar_sum = 0.0;
  for (const auto& r : rows) {
    const double rate = r.enrolled > 0 ? static_cast<double>(r.dlt_count) / r.enrolled : 0.0;
    rate_sum += rate;
    if (rate > theta) ++above;
    if (rate > theta + 0.1) ++above10;
    if (r.status == TrialStatus::stopped_safety_stage1) ++stop1;
    if (r.status == TrialStatus::stopped_safety_stage2) ++stop2;
    if (!is_stopped(r.status)) {
      rec_utils.push_back(r.has_recommendation ? true_surface(sc, r.x_opt, r.y_opt, true).U : 0.0);
    }
    for (const auto& [x, y] : r.ar_doses) {
      ar_sum += true_surface(sc, x, y).U;
      ++oc.n_ar_patients;
    }
  }
  oc.avg_dlt_rate = rate_sum / n;
  oc.pct_trials_dlt_above_thetaT = 100.0 * above / n;
  oc.pct_trials_dlt_above_thetaT_plus_10 = 100.0 * above10 / n;
  oc.pct_stop_stage1 = 100.0 * stop1 / n;
  oc.pct_stop_stage2 = 100.0 * stop2 / n;
  oc.pct_early_stop = 100.0 * (stop1 + stop2) / n;
  if (!rec_utils.empty()) {
    auto& u = oc.recommended_true_utility;
    u.n = static_cast<int>(rec_utils.size());
    u.mean = std::accumulate(rec_utils.begin(), rec_utils.end(), 0.0) / u.n;
    u.median = interpolated_quantile(rec_utils, 0.5);
    u.p025 = interpolated_quantile(rec_utils, 0.025);
    u.p975 = interpolated_quantile(rec_utils, 0.975);
  }
  if (oc.n_ar_patients > 0) oc.avg_ar_true_utility = ar_sum / oc.n_ar_patients;
  return oc;
}

}  // namespace combodose
