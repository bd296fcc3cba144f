#include "combodose/posterior.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <ostream>

#include <boost/random/gamma_distribution.hpp>
#include <boost/random/uniform_01.hpp>

#include "combodose/errors.hpp"
#include "combodose/rng.hpp"
#include "combodose/sampler.hpp"

namespace combodose {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kEtaShape = 0.1;
constexpr double kEtaRate = 0.1;
constexpr double kBetaSd = 10.0;
constexpr int kMaxInitDraws = 100;

double eta_log_norm() {
  return kEtaShape * std::log(kEtaRate) - std::lgamma(kEtaShape);
}

double normal_log_density(double v, double sd) {
  constexpr double kHalfLog2Pi = 0.91893853320467274178;
  const double z = v / sd;
  return -0.5 * z * z - std::log(sd) - kHalfLog2Pi;
}

// log(p (1 - p)) for p = expit(u).
double log_expit_jacobian(double u) { return log_expit(u) + log_expit(-u); }

// Bernoulli log-likelihood summed over cells for a linear predictor u:
// k log F(u) + (n - k) log F(-u) = n log F(u) - (n - k) u.
template <class Predictor>
double binomial_log_likelihood(std::span<const DoseCell> cells, Predictor&& lp, bool toxicity) {
  double ll = 0.0;
  for (const auto& cell : cells) {
    const double u = lp(cell.x, cell.y);
    const int k = toxicity ? cell.n_tox : cell.n_eff;
    ll += cell.n * log_expit(u) - (cell.n - k) * u;
  }
  return ll;
}

}  // namespace

int TrialData::dlt_count() const {
  int n = 0;
  for (const auto& r : records) n += r.z_T;
  return n;
}

void TrialData::validate() const {
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (!(r.x >= 0.0 && r.x <= 1.0 && r.y >= 0.0 && r.y <= 1.0)) {
      throw InvalidParams("record " + std::to_string(i) + ": dose outside [0,1]^2");
    }
    if ((r.z_T != 0 && r.z_T != 1) || (r.z_E != 0 && r.z_E != 1)) {
      throw InvalidParams("record " + std::to_string(i) + ": outcomes must be 0 or 1");
    }
  }
}

std::vector<DoseCell> aggregate(const TrialData& d) {
  std::vector<DoseCell> cells;
  for (const auto& r : d.records) {
    auto it = std::find_if(cells.begin(), cells.end(),
                           [&](const DoseCell& c) { return c.x == r.x && c.y == r.y; });
    if (it == cells.end()) {
      cells.push_back({r.x, r.y, 0, 0, 0});
      it = cells.end() - 1;
    }
    it->n += 1;
    it->n_tox += r.z_T;
    it->n_eff += r.z_E;
  }
  return cells;
}

void McmcConfig::validate() const {
  std::vector<std::string> bad;
  if (n_burn < 1) bad.emplace_back("n_burn");
  if (n_keep < 1) bad.emplace_back("n_keep");
  if (thin < 1) bad.emplace_back("thin");
  if (n_chains < 1) bad.emplace_back("n_chains");
  if (!(target_acceptance >= 0.2 && target_acceptance <= 0.5)) bad.emplace_back("target_acceptance");
  if (!bad.empty()) throw ConfigError("invalid MCMC configuration", bad);
}

McmcConfig McmcConfig::doubled() const {
  McmcConfig c = *this;
  c.n_burn *= 2;
  c.n_keep *= 2;
  return c;
}

double log_prior_toxicity(const ToxicityParams& p) {
  if (!p.in_support()) return kNegInf;
  if (p.eta == 0.0) return std::numeric_limits<double>::infinity();
  const double lp_rho00 = -std::log(std::min(p.rho01, p.rho10));
  const double lp_eta = eta_log_norm() + (kEtaShape - 1.0) * std::log(p.eta) - kEtaRate * p.eta;
  return lp_rho00 + lp_eta;
}

double log_likelihood_toxicity(const ToxicityParams& p, std::span<const DoseCell> cells) {
  const auto coef = toxicity_coefficients(p);
  return binomial_log_likelihood(
      cells, [&](double x, double y) { return coef.linear_predictor(x, y); }, true);
}

double log_posterior_toxicity(const ToxicityParams& p, const TrialData& d) {
  const double prior = log_prior_toxicity(p);
  if (prior == kNegInf) return kNegInf;
  const auto cells = aggregate(d);
  return prior + log_likelihood_toxicity(p, cells);
}

double log_prior_efficacy(const EfficacyParams& p) {
  if (!p.knots_valid()) return kNegInf;
  for (double b : p.beta) {
    if (!std::isfinite(b)) return kNegInf;
  }
  double lp = 2.0 * std::log(2.0);
  for (double b : p.beta) lp += normal_log_density(b, kBetaSd);
  return lp;
}

double log_likelihood_efficacy(const EfficacyParams& p, std::span<const DoseCell> cells) {
  return binomial_log_likelihood(
      cells, [&](double x, double y) { return p.linear_predictor(x, y); }, false);
}

double log_posterior_efficacy(const EfficacyParams& p, const TrialData& d) {
  const double prior = log_prior_efficacy(p);
  if (prior == kNegInf) return kNegInf;
  const auto cells = aggregate(d);
  return prior + log_likelihood_efficacy(p, cells);
}

namespace transform {

std::vector<double> toxicity_to_unconstrained(const ToxicityParams& p) {
  const double ratio = p.rho00 / std::min(p.rho01, p.rho10);
  return {logit(p.rho01), logit(p.rho10), logit(ratio), std::log(p.eta)};
}

ToxicityParams toxicity_from_unconstrained(std::span<const double> u) {
  ToxicityParams p;
  p.rho01 = expit(u[0]);
  p.rho10 = expit(u[1]);
  p.rho00 = expit(u[2]) * std::min(p.rho01, p.rho10);
  p.eta = std::exp(u[3]);
  return p;
}

double toxicity_log_jacobian(std::span<const double> u) {
  const auto p = toxicity_from_unconstrained(u);
  return std::log(std::min(p.rho01, p.rho10)) + log_expit_jacobian(u[0]) +
         log_expit_jacobian(u[1]) + log_expit_jacobian(u[2]) + u[3];
}

double toxicity_log_target(std::span<const double> u, std::span<const DoseCell> cells) {
  const auto p = toxicity_from_unconstrained(u);
  if (!p.in_support() || !std::isfinite(u[3])) return kNegInf;
  // The conditional prior density of rho00 cancels against its jacobian;
  // eta's gamma density times eta is exp(shape * u - rate * eta).
  const double prior = log_expit_jacobian(u[0]) + log_expit_jacobian(u[1]) +
                       log_expit_jacobian(u[2]) + eta_log_norm() + kEtaShape * u[3] -
                       kEtaRate * p.eta;
  return prior + log_likelihood_toxicity(p, cells);
}

std::vector<double> efficacy_to_unconstrained(const EfficacyParams& p) {
  std::vector<double> v(p.beta.begin(), p.beta.end());
  const auto push_pair = [&](double lo, double hi) {
    v.push_back(logit(lo));
    v.push_back(logit((hi - lo) / (1.0 - lo)));
  };
  push_pair(p.knots[1], p.knots[2]);
  push_pair(p.knots[4], p.knots[5]);
  return v;
}

EfficacyParams efficacy_from_unconstrained(std::span<const double> v) {
  EfficacyParams p;
  std::copy(v.begin(), v.begin() + 12, p.beta.begin());
  const auto pair = [&](double a, double b, double& lo, double& hi) {
    lo = expit(a);
    hi = std::min(lo + (1.0 - lo) * expit(b), 1.0);
  };
  p.knots[0] = 0.0;
  p.knots[3] = 0.0;
  pair(v[12], v[13], p.knots[1], p.knots[2]);
  pair(v[14], v[15], p.knots[4], p.knots[5]);
  return p;
}

double efficacy_log_jacobian(std::span<const double> v) {
  const auto p = efficacy_from_unconstrained(v);
  return log_expit_jacobian(v[12]) + std::log1p(-p.knots[1]) + log_expit_jacobian(v[13]) +
         log_expit_jacobian(v[14]) + std::log1p(-p.knots[4]) + log_expit_jacobian(v[15]);
}

double efficacy_log_target(std::span<const double> v, std::span<const DoseCell> cells) {
  const auto p = efficacy_from_unconstrained(v);
  const double prior = log_prior_efficacy(p);
  if (prior == kNegInf) return kNegInf;
  return prior + efficacy_log_jacobian(v) + log_likelihood_efficacy(p, cells);
}

}  // namespace transform

double ChainSet::max_split_rhat() const {
  double m = 0.0;
  for (const auto& d : diagnostics) m = std::max(m, d.split_rhat);
  return m;
}

namespace {

struct ChainRun {
  std::vector<Eigen::VectorXd> draws;
  double acceptance = 0.0;
};

template <class LogTarget>
ChainRun run_chain(Eigen::VectorXd state, const Eigen::VectorXd& initial_sd, LogTarget&& f,
                   const McmcConfig& cfg, Rng& rng) {
  AdaptiveRandomWalk kernel(initial_sd, cfg.target_acceptance);
  double lt = f(state);
  for (int t = 0; t < cfg.n_burn; ++t) kernel.step(state, lt, f, rng);
  kernel.freeze();
  ChainRun run;
  run.draws.reserve(cfg.n_keep);
  for (int s = 0; s < cfg.n_keep; ++s) {
    for (int k = 0; k < cfg.thin; ++k) kernel.step(state, lt, f, rng);
    run.draws.push_back(state);
  }
  run.acceptance = kernel.acceptance_rate();
  return run;
}

Eigen::VectorXd initial_toxicity_state(std::span<const DoseCell> cells, Rng& rng) {
  boost::random::uniform_01<double> unif;
  boost::random::gamma_distribution<double> gamma(kEtaShape, 1.0 / kEtaRate);
  for (int attempt = 0; attempt < kMaxInitDraws; ++attempt) {
    ToxicityParams p;
    p.rho01 = unif(rng);
    p.rho10 = unif(rng);
    p.rho00 = unif(rng) * std::min(p.rho01, p.rho10);
    p.eta = gamma(rng);
    const auto u = transform::toxicity_to_unconstrained(p);
    if (std::isfinite(transform::toxicity_log_target(u, cells))) {
      return Eigen::Map<const Eigen::VectorXd>(u.data(), static_cast<Eigen::Index>(u.size()));
    }
  }
  throw InitializationFailure("no finite toxicity log posterior after 100 prior draws");
}

}  // namespace

ChainSet sample_chains(const TrialData& d, const McmcConfig& cfg, FitBlocks blocks) {
  cfg.validate();
  d.validate();
  const auto cells = aggregate(d);
  const std::span<const DoseCell> cell_span(cells);

  ChainSet out;
  out.n_chains = cfg.n_chains;
  const bool with_eff = blocks == FitBlocks::toxicity_and_efficacy;
  out.tox_draws.reserve(static_cast<std::size_t>(cfg.n_chains) * cfg.n_keep);
  if (with_eff) out.eff_draws.reserve(static_cast<std::size_t>(cfg.n_chains) * cfg.n_keep);
  double tox_accept = 0.0;
  double eff_accept = 0.0;

  const auto tox_target = [&](const Eigen::VectorXd& u) {
    return transform::toxicity_log_target(std::span<const double>(u.data(), u.size()), cell_span);
  };
  const auto eff_target = [&](const Eigen::VectorXd& v) {
    return transform::efficacy_log_target(std::span<const double>(v.data(), v.size()), cell_span);
  };

  for (int c = 0; c < cfg.n_chains; ++c) {
    Rng rng = make_rng(derive_seed(cfg.seed, tag(Stream::toxicity_chain), c));
    Eigen::VectorXd init = initial_toxicity_state(cell_span, rng);
    Eigen::VectorXd sd(transform::kToxicityDim);
    sd << 0.5, 0.5, 0.5, 1.0;
    const auto run = run_chain(init, sd, tox_target, cfg, rng);
    tox_accept += run.acceptance / cfg.n_chains;
    for (const auto& u : run.draws) {
      out.tox_draws.push_back(
          transform::toxicity_from_unconstrained(std::span<const double>(u.data(), u.size())));
    }
  }

  if (with_eff) {
    for (int c = 0; c < cfg.n_chains; ++c) {
      Rng rng = make_rng(derive_seed(cfg.seed, tag(Stream::efficacy_chain), c));
      const auto v0 = transform::efficacy_to_unconstrained(EfficacyParams{});
      Eigen::VectorXd init =
          Eigen::Map<const Eigen::VectorXd>(v0.data(), static_cast<Eigen::Index>(v0.size()));
      if (!std::isfinite(eff_target(init))) {
        throw InitializationFailure("efficacy log posterior is not finite at the default start");
      }
      Eigen::VectorXd sd = Eigen::VectorXd::Constant(transform::kEfficacyDim, 1.0);
      sd.tail(4).setConstant(0.5);
      const auto run = run_chain(init, sd, eff_target, cfg, rng);
      eff_accept += run.acceptance / cfg.n_chains;
      for (const auto& v : run.draws) {
        out.eff_draws.push_back(
            transform::efficacy_from_unconstrained(std::span<const double>(v.data(), v.size())));
      }
    }
  }

  const auto add_diag = [&](std::string name, double accept, auto getter, std::size_t n) {
    std::vector<double> xs(n);
    for (std::size_t s = 0; s < n; ++s) xs[s] = getter(s);
    out.diagnostics.push_back({std::move(name), accept, split_rhat(xs, cfg.n_chains)});
  };
  const std::size_t nt = out.tox_draws.size();
  add_diag("rho00", tox_accept, [&](std::size_t s) { return out.tox_draws[s].rho00; }, nt);
  add_diag("rho01", tox_accept, [&](std::size_t s) { return out.tox_draws[s].rho01; }, nt);
  add_diag("rho10", tox_accept, [&](std::size_t s) { return out.tox_draws[s].rho10; }, nt);
  add_diag("eta", tox_accept, [&](std::size_t s) { return out.tox_draws[s].eta; }, nt);
  if (with_eff) {
    const std::size_t ne = out.eff_draws.size();
    for (int r = 0; r < 12; ++r) {
      add_diag("beta" + std::to_string(r), eff_accept,
               [&](std::size_t s) { return out.eff_draws[s].beta[r]; }, ne);
    }
    for (int k : {1, 2, 4, 5}) {
      add_diag("kappa" + std::to_string(k + 1), eff_accept,
               [&](std::size_t s) { return out.eff_draws[s].knots[k]; }, ne);
    }
  }
  return out;
}

double split_rhat(std::span<const double> draws, int n_chains) {
  const std::size_t per_chain = draws.size() / n_chains;
  const std::size_t half = per_chain / 2;
  if (half < 2) return std::numeric_limits<double>::quiet_NaN();
  std::vector<double> means;
  std::vector<double> vars;
  for (int c = 0; c < n_chains; ++c) {
    for (int h = 0; h < 2; ++h) {
      // Odd-length chains drop their middle draw.
      const std::size_t start = c * per_chain + (h == 0 ? 0 : per_chain - half);
      const auto seg = draws.subspan(start, half);
      const double m = std::accumulate(seg.begin(), seg.end(), 0.0) / half;
      double ss = 0.0;
      for (double v : seg) ss += (v - m) * (v - m);
      means.push_back(m);
      vars.push_back(ss / (half - 1));
    }
  }
  const double n = static_cast<double>(half);
  const double k = static_cast<double>(means.size());
  const double grand = std::accumulate(means.begin(), means.end(), 0.0) / k;
  double b = 0.0;
  for (double m : means) b += (m - grand) * (m - grand);
  b *= n / (k - 1.0);
  const double w = std::accumulate(vars.begin(), vars.end(), 0.0) / k;
  if (w == 0.0) return b == 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
  const double var_plus = (n - 1.0) / n * w + b / n;
  return std::sqrt(var_plus / w);
}

double batch_means_se(std::span<const double> draws, int n_batches) {
  const std::size_t len = draws.size() / n_batches;
  if (len == 0) return std::numeric_limits<double>::quiet_NaN();
  std::vector<double> means(n_batches);
  for (int b = 0; b < n_batches; ++b) {
    const auto seg = draws.subspan(b * len, len);
    means[b] = std::accumulate(seg.begin(), seg.end(), 0.0) / len;
  }
  const double grand = std::accumulate(means.begin(), means.end(), 0.0) / n_batches;
  double ss = 0.0;
  for (double m : means) ss += (m - grand) * (m - grand);
  return std::sqrt(ss / (n_batches - 1) / n_batches);
}

void write_chainset_table(std::ostream& os, const ChainSet& c) {
  os << "chain,draw,rho00,rho01,rho10,eta";
  if (c.has_efficacy()) {
    for (int r = 0; r < 12; ++r) os << ",beta" << r;
    for (int k = 1; k <= 6; ++k) os << ",kappa" << k;
  }
  os << '\n';
  char buf[32];
  const auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    os << ',' << buf;
  };
  const std::size_t per = c.draws_per_chain();
  for (std::size_t s = 0; s < c.tox_draws.size(); ++s) {
    os << s / per << ',' << s % per;
    const auto& t = c.tox_draws[s];
    put(t.rho00);
    put(t.rho01);
    put(t.rho10);
    put(t.eta);
    if (c.has_efficacy()) {
      const auto& e = c.eff_draws[s];
      for (double b : e.beta) put(b);
      for (double k : e.knots) put(k);
    }
    os << '\n';
  }
}

bool PosteriorSummary::is_safe(int i, int j) const {
  return std::find(safe_set.begin(), safe_set.end(), GridCombo{i, j}) != safe_set.end();
}

namespace {

// Utility of one (toxicity, efficacy) draw at one dose. utility_lattice
// repeats this arithmetic in the same order so point and lattice values
// agree bit for bit.
inline double draw_utility(const ToxicityCoefficients& tc, const EfficacyParams& e,
                           double x, double y, double lt_cut, const UtilityTradeoff& t) {
  const double u_t = (tc.a0 + tc.a1 * x) + (tc.a2 + tc.eta * x) * y;
  if (u_t > lt_cut) return 0.0;
  const double pi_t = expit(u_t);
  if (pi_t > t.theta_T) return 0.0;
  const double pi_e = expit(e.x_part(x) + e.y_part(y) + e.beta[11] * x * y);
  return utility_unchecked(pi_t, pi_e, t);
}

double lattice_point(int i, int resolution) {
  return static_cast<double>(i) / (resolution - 1);
}

// Beyond this linear predictor the toxicity probability certainly exceeds
// theta_T, so the exponentials can be skipped.
double toxicity_cut(const UtilityTradeoff& t) { return logit(t.theta_T) + 1e-6; }

}  // namespace

double posterior_mean_utility(const ChainSet& c, const UtilityTradeoff& t, double x, double y) {
  if (!c.has_efficacy()) throw StateError("utility requires efficacy draws");
  const double cut = toxicity_cut(t);
  double acc = 0.0;
  for (std::size_t s = 0; s < c.tox_draws.size(); ++s) {
    acc += draw_utility(toxicity_coefficients(c.tox_draws[s]), c.eff_draws[s], x, y, cut, t);
  }
  return acc / static_cast<double>(c.tox_draws.size());
}

std::vector<double> utility_lattice(const ChainSet& c, const UtilityTradeoff& t, int resolution) {
  if (!c.has_efficacy()) throw StateError("utility requires efficacy draws");
  if (resolution < 2) throw InvalidParams("lattice resolution must be at least 2");
  const double cut = toxicity_cut(t);
  const std::size_t r = static_cast<std::size_t>(resolution);
  std::vector<double> acc(r * r, 0.0);
  std::vector<double> pts(r);
  for (std::size_t i = 0; i < r; ++i) pts[i] = lattice_point(static_cast<int>(i), resolution);
  std::vector<double> xp(r);
  std::vector<double> yp(r);
  for (std::size_t s = 0; s < c.tox_draws.size(); ++s) {
    const auto tc = toxicity_coefficients(c.tox_draws[s]);
    const auto& e = c.eff_draws[s];
    for (std::size_t i = 0; i < r; ++i) {
      xp[i] = e.x_part(pts[i]);
      yp[i] = e.y_part(pts[i]);
    }
    for (std::size_t i = 0; i < r; ++i) {
      const double x = pts[i];
      double* row = acc.data() + i * r;
      // With a nonnegative slope in y the safe points of a row form a prefix.
      const bool prefix = tc.a2 + tc.eta * x >= 0.0;
      for (std::size_t j = 0; j < r; ++j) {
        const double y = pts[j];
        const double u_t = (tc.a0 + tc.a1 * x) + (tc.a2 + tc.eta * x) * y;
        const double pi_t = u_t > cut ? 1.0 : expit(u_t);
        if (pi_t > t.theta_T) {
          if (prefix) break;
          continue;
        }
        const double pi_e = expit(xp[i] + yp[j] + e.beta[11] * x * y);
        row[j] += utility_unchecked(pi_t, pi_e, t);
      }
    }
  }
  const double n = static_cast<double>(c.tox_draws.size());
  for (double& v : acc) v /= n;
  return acc;
}

PosteriorSummary summarize_on_grid(const ChainSet& c, const StandardDoseGrid& g,
                                   const UtilityTradeoff& t, int lattice_resolution) {
  PosteriorSummary ps;
  ps.nx = static_cast<int>(g.nx());
  ps.ny = static_cast<int>(g.ny());
  const std::size_t cells = g.size();
  const double n = static_cast<double>(c.tox_draws.size());
  ps.pi_T_hat.assign(cells, 0.0);
  if (c.has_efficacy()) {
    ps.pi_E_hat.assign(cells, 0.0);
    ps.U_hat.assign(cells, 0.0);
  }
  for (std::size_t s = 0; s < c.tox_draws.size(); ++s) {
    const auto tc = toxicity_coefficients(c.tox_draws[s]);
    for (int i = 0; i < ps.nx; ++i) {
      for (int j = 0; j < ps.ny; ++j) {
        const double x = g.x_levels[i];
        const double y = g.y_levels[j];
        const double pi_t = expit((tc.a0 + tc.a1 * x) + (tc.a2 + tc.eta * x) * y);
        const std::size_t k = static_cast<std::size_t>(i) * ps.ny + j;
        ps.pi_T_hat[k] += pi_t;
        if (c.has_efficacy()) {
          const auto& e = c.eff_draws[s];
          const double pi_e = expit(e.x_part(x) + e.y_part(y) + e.beta[11] * x * y);
          ps.pi_E_hat[k] += pi_e;
          ps.U_hat[k] += utility_unchecked(pi_t, pi_e, t);
        }
      }
    }
  }
  for (auto* v : {&ps.pi_T_hat, &ps.pi_E_hat, &ps.U_hat}) {
    for (double& x : *v) x /= n;
  }
  for (int i = 0; i < ps.nx; ++i) {
    for (int j = 0; j < ps.ny; ++j) {
      if (ps.pi_T_hat[static_cast<std::size_t>(i) * ps.ny + j] <= t.theta_T) {
        ps.safe_set.push_back({i, j});
      }
    }
  }
  if (lattice_resolution > 0 && c.has_efficacy()) {
    ps.lattice_resolution = lattice_resolution;
    ps.lattice_U_hat = utility_lattice(c, t, lattice_resolution);
  }
  return ps;
}

std::vector<double> conditional_mtd_samples(const ChainSet& c, Axis fixed_axis,
                                            double fixed_dose, double theta_T) {
  if (!(fixed_dose >= 0.0 && fixed_dose <= 1.0)) throw DomainError("fixed dose outside [0,1]");
  const double target = logit(theta_T);
  std::vector<double> out;
  out.reserve(c.tox_draws.size());
  for (const auto& p : c.tox_draws) {
    const auto tc = toxicity_coefficients(p);
    double num;
    double den;
    if (fixed_axis == Axis::y) {
      num = target - tc.a0 - tc.a2 * fixed_dose;
      den = tc.a1 + tc.eta * fixed_dose;
    } else {
      num = target - tc.a0 - tc.a1 * fixed_dose;
      den = tc.a2 + tc.eta * fixed_dose;
    }
    double mtd;
    if (den > 0.0) {
      mtd = num / den;
    } else {
      // Flat dose-toxicity line: every dose is either below or above theta_T.
      mtd = num >= 0.0 ? std::numeric_limits<double>::infinity()
                       : -std::numeric_limits<double>::infinity();
    }
    out.push_back(std::clamp(mtd, 0.0, 1.0));
  }
  return out;
}

double empirical_quantile(std::vector<double> samples, double alpha) {
  if (samples.empty()) throw InvalidParams("quantile of an empty sample");
  if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidParams("quantile level must lie in (0,1)");
  const double n = static_cast<double>(samples.size());
  auto k = static_cast<std::size_t>(std::ceil(alpha * n - 1e-9));
  k = std::clamp<std::size_t>(k, 1, samples.size());
  std::nth_element(samples.begin(), samples.begin() + (k - 1), samples.end());
  return samples[k - 1];
}

double conditional_mtd_percentile(const ChainSet& c, Axis fixed_axis, double fixed_dose,
                                  double alpha, double theta_T) {
  return empirical_quantile(conditional_mtd_samples(c, fixed_axis, fixed_dose, theta_T), alpha);
}

}  // namespace combodose
