#include "combodose/trial_engine.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include <boost/math/special_functions/beta.hpp>
#include <boost/random/uniform_01.hpp>
#include <boost/random/uniform_int_distribution.hpp>

#include "combodose/errors.hpp"

namespace combodose {

std::string to_string(TrialStatus s) {
  switch (s) {
    case TrialStatus::active:
      return "active";
    case TrialStatus::stopped_safety_stage1:
      return "stopped-safety-stage1";
    case TrialStatus::stopped_safety_stage2:
      return "stopped-safety-stage2";
    case TrialStatus::completed:
      return "completed";
  }
  return "unknown";
}

TrialStatus parse_trial_status(const std::string& s) {
  for (auto st : {TrialStatus::active, TrialStatus::stopped_safety_stage1,
                  TrialStatus::stopped_safety_stage2, TrialStatus::completed}) {
    if (to_string(st) == s) return st;
  }
  throw InvalidParams("unknown trial status '" + s + "'");
}

double feasibility_alpha(int c1, const DesignConstants& k) {
  if (c1 < 1) throw InvalidParams("cohort index must be at least 1");
  return std::min(k.alpha_start + k.alpha_step * (c1 - 1), k.alpha_stop);
}

double stage1_overdose_probability(const ChainSet& c, double theta_T) {
  if (c.tox_draws.empty()) throw InvalidParams("empty chain set");
  const double limit = theta_T + 0.1;
  std::size_t above = 0;
  for (const auto& p : c.tox_draws) {
    if (toxicity_prob(p, 0.0, 0.0) > limit) ++above;
  }
  return static_cast<double>(above) / static_cast<double>(c.tox_draws.size());
}

bool stage1_safety_stop(const ChainSet& c, double theta_T, double delta1) {
  return stage1_overdose_probability(c, theta_T) > delta1;
}

double stage2_overdose_probability(int n_dlt, int n, double theta_T) {
  if (n < 0 || n_dlt < 0 || n_dlt > n) throw InvalidParams("need 0 <= n_dlt <= n");
  const double limit = theta_T + 0.1;
  if (limit >= 1.0) return 0.0;
  return boost::math::ibetac(0.5 + n_dlt, 0.5 + (n - n_dlt), limit);
}

bool stage2_safety_stop(int n_dlt, int n, double theta_T, double delta2) {
  return stage2_overdose_probability(n_dlt, n, theta_T) > delta2;
}

int nearest_level(std::span<const double> levels, double v) {
  int best = 0;
  double best_dist = std::abs(levels[0] - v);
  for (std::size_t i = 1; i < levels.size(); ++i) {
    const double d = std::abs(levels[i] - v);
    if (d < best_dist) {
      best = static_cast<int>(i);
      best_dist = d;
    }
  }
  return best;
}

namespace {

int highest_true(const std::vector<bool>& v) {
  for (int i = static_cast<int>(v.size()) - 1; i >= 0; --i) {
    if (v[i]) return i;
  }
  return -1;
}

}  // namespace

int TrialState::highest_tried_x() const { return highest_true(tried_x); }
int TrialState::highest_tried_y() const { return highest_true(tried_y); }

CohortAssignment stage1_assign(const TrialState& s, const ChainSet& c) {
  if (s.stage != 1 || s.status != TrialStatus::active) {
    throw StateError("stage I assignment requested outside an active stage I");
  }
  if (s.constants.m1 != 2) throw StateError("stage I requires cohorts of two");
  const int c1 = s.cohort1 + 1;
  if (c1 > s.constants.C1) throw StateError("all stage I cohorts are already enrolled");

  CohortAssignment out;
  out.stage = 1;
  out.cohort = c1;
  const int p1 = 2 * c1 - 1;
  const int p2 = 2 * c1;
  const auto& g = s.grid;
  if (c1 == 1) {
    out.patients = {{p1, 0, 0, g.x_levels[0], g.y_levels[0]},
                    {p2, 0, 0, g.x_levels[0], g.y_levels[0]}};
    return out;
  }
  const double alpha = feasibility_alpha(c1, s.constants);
  out.alpha = alpha;
  const double theta = s.constants.theta_T;
  // Patients 2c1-3 and 2c1-2 (1-based) are the previous cohort.
  const Assignment& prev1 = s.assignments.at(static_cast<std::size_t>(2 * c1 - 4));
  const Assignment& prev2 = s.assignments.at(static_cast<std::size_t>(2 * c1 - 3));

  const auto new_x = [&](int y_index) {
    const double q = conditional_mtd_percentile(c, Axis::y, g.y_levels[y_index], alpha, theta);
    return std::min(nearest_level(g.x_levels, q), s.highest_tried_x() + 1);
  };
  const auto new_y = [&](int x_index) {
    const double q = conditional_mtd_percentile(c, Axis::x, g.x_levels[x_index], alpha, theta);
    return std::min(nearest_level(g.y_levels, q), s.highest_tried_y() + 1);
  };
  const auto make = [&](int patient, int i, int j) {
    return Assignment{patient, i, j, g.x_levels[i], g.y_levels[j]};
  };

  if (c1 % 2 == 0) {
    out.patients.push_back(make(p1, new_x(prev1.y_index), prev1.y_index));
    out.patients.push_back(make(p2, prev2.x_index, new_y(prev2.x_index)));
  } else {
    out.patients.push_back(make(p1, prev1.x_index, new_y(prev1.x_index)));
    out.patients.push_back(make(p2, new_x(prev2.y_index), prev2.y_index));
  }
  return out;
}

CohortAssignment stage2_initial_allocation(const TrialState& s, const PosteriorSummary& ps,
                                           Rng& rng) {
  const auto& safe = ps.safe_set;
  if (safe.empty()) throw NoAdmissibleDose("no dose combination is estimated safe");
  const int n2 = s.constants.n2;
  CohortAssignment out;
  out.stage = 2;
  out.cohort = 1;
  int patient = s.enrolled() + 1;
  const auto push = [&](const GridCombo& gc) {
    out.patients.push_back(
        {patient++, gc.i, gc.j, s.grid.x_levels[gc.i], s.grid.y_levels[gc.j]});
  };
  const int n_safe = static_cast<int>(safe.size());
  if (n_safe >= n2) {
    std::vector<int> idx(n_safe);
    std::iota(idx.begin(), idx.end(), 0);
    for (int k = 0; k < n2; ++k) {
      boost::random::uniform_int_distribution<int> pick(k, n_safe - 1);
      std::swap(idx[k], idx[pick(rng)]);
      push(safe[idx[k]]);
    }
  } else {
    for (const auto& gc : safe) push(gc);
    boost::random::uniform_int_distribution<int> pick(0, n_safe - 1);
    for (int k = n_safe; k < n2; ++k) push(safe[pick(rng)]);
  }
  return out;
}

std::vector<double> ar_probabilities(const PosteriorSummary& ps) {
  const auto& safe = ps.safe_set;
  if (safe.empty()) throw NoAdmissibleDose("no dose combination is estimated safe");
  std::vector<double> w(safe.size());
  double total = 0.0;
  for (std::size_t k = 0; k < safe.size(); ++k) {
    w[k] = std::max(ps.U_at(safe[k]), 0.0);
    total += w[k];
  }
  if (!(total > 0.0)) {
    std::fill(w.begin(), w.end(), 1.0 / static_cast<double>(safe.size()));
    return w;
  }
  for (double& v : w) v /= total;
  return w;
}

CohortAssignment stage2_ar_assign(const PosteriorSummary& ps, const StandardDoseGrid& g, int m2,
                                  int first_patient, int cohort, Rng& rng) {
  const auto probs = ar_probabilities(ps);
  CohortAssignment out;
  out.stage = 2;
  out.cohort = cohort;
  boost::random::uniform_01<double> unif;
  for (int k = 0; k < m2; ++k) {
    const double u = unif(rng);
    std::size_t pick = probs.size() - 1;
    double cum = 0.0;
    for (std::size_t q = 0; q < probs.size(); ++q) {
      cum += probs[q];
      if (u < cum) {
        pick = q;
        break;
      }
    }
    const auto& gc = ps.safe_set[pick];
    out.patients.push_back({first_patient + k, gc.i, gc.j, g.x_levels[gc.i], g.y_levels[gc.j]});
  }
  return out;
}

Recommendation recommend_optimal(const ChainSet& c, const UtilityTradeoff& t, int resolution) {
  Recommendation rec;
  rec.lattice_resolution = resolution;
  rec.lattice_U_hat = utility_lattice(c, t, resolution);
  int best_i = 0;
  int best_j = 0;
  double best = rec.lattice_U_hat[0];
  for (int i = 0; i < resolution; ++i) {
    for (int j = 0; j < resolution; ++j) {
      const double v = rec.lattice_U_hat[static_cast<std::size_t>(i) * resolution + j];
      if (v > best) {
        best = v;
        best_i = i;
        best_j = j;
      }
    }
  }
  if (!(best > 0.0)) {
    rec.admissible = false;
    return rec;
  }
  double x = static_cast<double>(best_i) / (resolution - 1);
  double y = static_cast<double>(best_j) / (resolution - 1);
  double step = 1.0 / (resolution - 1);
  constexpr int kHalvings = 6;
  constexpr int kMaxMoves = 1000;
  for (int level = 0; level <= kHalvings; ++level) {
    for (int moves = 0; moves < kMaxMoves; ++moves) {
      bool moved = false;
      const std::array<std::array<double, 2>, 4> dirs{{{step, 0.0}, {-step, 0.0}, {0.0, step}, {0.0, -step}}};
      for (const auto& d : dirs) {
        const double cx = std::clamp(x + d[0], 0.0, 1.0);
        const double cy = std::clamp(y + d[1], 0.0, 1.0);
        if (cx == x && cy == y) continue;
        const double v = posterior_mean_utility(c, t, cx, cy);
        if (v > best) {
          x = cx;
          y = cy;
          best = v;
          moved = true;
          break;
        }
      }
      if (!moved) break;
    }
    step /= 2.0;
  }
  rec.admissible = true;
  rec.x_opt = x;
  rec.y_opt = y;
  rec.U_hat = best;
  return rec;
}

Trial::Trial(StandardDoseGrid grid, DesignConstants constants, UtilityTradeoff tradeoff,
             McmcConfig mcmc, std::uint64_t seed, TrialOptions options)
    : mcmc_(mcmc), seed_(seed), options_(options) {
  constants.validate();
  tradeoff.validate();
  mcmc.validate();
  if (tradeoff.theta_T != constants.theta_T) {
    throw ConfigError("utility theta_T must equal the design theta_T", {"theta_T"});
  }
  if (options.lattice_resolution < 2) {
    throw ConfigError("lattice resolution must be at least 2", {"lattice_resolution"});
  }
  state_.tried_x.assign(grid.nx(), false);
  state_.tried_y.assign(grid.ny(), false);
  state_.grid = std::move(grid);
  state_.constants = constants;
  state_.tradeoff = tradeoff;
  pending_ = stage1_assign(state_, ChainSet{});
}

ChainSet Trial::fit(bool with_efficacy, bool final_fit) {
  McmcConfig cfg = final_fit ? mcmc_.doubled() : mcmc_;
  cfg.seed = derive_seed(seed_, tag(Stream::fit), static_cast<std::uint64_t>(++fits_));
  return sample_chains(state_.data, cfg,
                       with_efficacy ? FitBlocks::toxicity_and_efficacy : FitBlocks::toxicity_only);
}

void Trial::enter_stage2(CohortEvent& ev) {
  state_.stage = 2;
  const std::uint64_t alloc_seed = derive_seed(seed_, tag(Stream::allocation),
                                               static_cast<std::uint64_t>(events_.size() + 1));
  Rng rng = make_rng(alloc_seed);
  pending_ = stage2_initial_allocation(state_, *summary_, rng);
  ev.next_allocation_seed = alloc_seed;
}

const CohortEvent& Trial::record(std::span<const Outcome> outcomes) {
  if (state_.status != TrialStatus::active || !pending_) {
    throw StateError("no cohort is awaiting outcomes");
  }
  const CohortAssignment assigned = *pending_;
  if (outcomes.size() != assigned.patients.size()) {
    throw InvalidParams("expected outcomes for " + std::to_string(assigned.patients.size()) +
                        " patients, got " + std::to_string(outcomes.size()));
  }
  std::vector<Outcome> ordered;
  ordered.reserve(outcomes.size());
  for (const auto& a : assigned.patients) {
    const auto it = std::find_if(outcomes.begin(), outcomes.end(),
                                 [&](const Outcome& o) { return o.patient == a.patient; });
    if (it == outcomes.end()) {
      throw InvalidParams("missing outcome for patient " + std::to_string(a.patient));
    }
    if ((it->z_T != 0 && it->z_T != 1) || (it->z_E != 0 && it->z_E != 1)) {
      throw InvalidParams("outcomes must be binary (patient " + std::to_string(a.patient) + ")");
    }
    ordered.push_back(*it);
  }

  for (std::size_t k = 0; k < assigned.patients.size(); ++k) {
    const auto& a = assigned.patients[k];
    state_.data.records.push_back(
        {a.x, a.y, ordered[k].z_T, ordered[k].z_E, assigned.stage, assigned.cohort});
    state_.assignments.push_back(a);
    state_.tried_x[a.x_index] = true;
    state_.tried_y[a.y_index] = true;
  }
  pending_.reset();

  CohortEvent ev;
  ev.stage = assigned.stage;
  ev.cohort = assigned.cohort;
  ev.alpha = assigned.alpha;
  ev.assignments = assigned.patients;
  ev.outcomes = ordered;
  const auto& k = state_.constants;

  if (assigned.stage == 1) {
    state_.cohort1 = assigned.cohort;
    const bool last = state_.cohort1 == k.C1;
    chains_ = fit(options_.fit_efficacy_in_stage1, false);
    ev.fit_seed = derive_seed(seed_, tag(Stream::fit), static_cast<std::uint64_t>(fits_));
    const double prob = stage1_overdose_probability(*chains_, k.theta_T);
    ev.stop_rule = StopEvaluation{1, prob, k.delta1, prob > k.delta1};
    summary_ = summarize_on_grid(*chains_, state_.grid, state_.tradeoff,
                                 options_.summary_lattice_resolution);
    if (ev.stop_rule->stop) {
      state_.status = TrialStatus::stopped_safety_stage1;
    } else if (!last) {
      pending_ = stage1_assign(state_, *chains_);
    } else {
      if (summary_->safe_set.empty()) {
        state_.no_admissible_dose = true;
        state_.status = TrialStatus::stopped_safety_stage2;
        state_.stage = 2;
      } else {
        enter_stage2(ev);
      }
    }
  } else {
    state_.cohort2 = assigned.cohort;
    const bool last = state_.cohort2 == 1 + k.C2;
    chains_ = fit(true, last);
    ev.fit_seed = derive_seed(seed_, tag(Stream::fit), static_cast<std::uint64_t>(fits_));
    if (last) {
      // No stopping rule after the final cohort: the trial has nothing left
      // to protect and is scored on its recommendation.
      recommendation_ = recommend_optimal(*chains_, state_.tradeoff, options_.lattice_resolution);
      summary_ = summarize_on_grid(*chains_, state_.grid, state_.tradeoff, 0);
      summary_->lattice_resolution = recommendation_->lattice_resolution;
      summary_->lattice_U_hat = recommendation_->lattice_U_hat;
      state_.status = TrialStatus::completed;
      Recommendation brief = *recommendation_;
      brief.lattice_U_hat.clear();
      ev.recommendation = brief;
    } else {
      const int n = state_.enrolled();
      const double prob = stage2_overdose_probability(state_.data.dlt_count(), n, k.theta_T);
      ev.stop_rule = StopEvaluation{2, prob, k.delta2, prob > k.delta2};
      summary_ = summarize_on_grid(*chains_, state_.grid, state_.tradeoff,
                                   options_.summary_lattice_resolution);
      if (ev.stop_rule->stop) {
        state_.status = TrialStatus::stopped_safety_stage2;
      } else if (summary_->safe_set.empty()) {
        state_.no_admissible_dose = true;
        state_.status = TrialStatus::stopped_safety_stage2;
      } else {
        const std::uint64_t alloc_seed = derive_seed(
            seed_, tag(Stream::allocation), static_cast<std::uint64_t>(events_.size() + 1));
        Rng rng = make_rng(alloc_seed);
        pending_ = stage2_ar_assign(*summary_, state_.grid, k.m2, n + 1, state_.cohort2 + 1, rng);
        ev.next_allocation_seed = alloc_seed;
      }
    }
  }
  ev.status = state_.status;
  ev.no_admissible_dose = state_.no_admissible_dose;
  events_.push_back(std::move(ev));
  return events_.back();
}

}  // namespace combodose
