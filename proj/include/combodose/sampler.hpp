#pragma once

// Adaptive random-walk Metropolis for one parameter block on an
// unconstrained space. During burn-in the global proposal scale follows a
// Robbins-Monro recursion toward the target acceptance probability and the
// proposal shape tracks the empirical covariance of the chain; both are
// frozen once burn-in ends so the kept draws come from a fixed kernel.

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_01.hpp>

#include "combodose/rng.hpp"

namespace combodose {

class AdaptiveRandomWalk {
 public:
  AdaptiveRandomWalk(const Eigen::VectorXd& initial_sd, double target_acceptance);

  // One Metropolis update of `state` (with cached log target `log_target`).
  // Returns true if the proposal was accepted.
  template <class LogTarget>
  bool step(Eigen::VectorXd& state, double& log_target, LogTarget&& f, Rng& rng);

  // Stops adaptation and resets the acceptance counters.
  void freeze();
  bool frozen() const { return frozen_; }
  double acceptance_rate() const {
    return n_steps_ == 0 ? 0.0 : static_cast<double>(n_accepted_) / n_steps_;
  }
  double log_scale() const { return log_scale_; }
  const Eigen::MatrixXd& proposal_cholesky() const { return chol_; }

 private:
  void adapt(const Eigen::VectorXd& state, double accept_prob);
  void refresh_cholesky();

  int dim_;
  double target_;
  double log_scale_ = 0.0;
  bool frozen_ = false;
  bool using_empirical_ = false;
  std::int64_t iteration_ = 0;
  std::int64_t n_steps_ = 0;
  std::int64_t n_accepted_ = 0;
  Eigen::MatrixXd base_chol_;  // Cholesky factor of the proposal shape
  Eigen::MatrixXd chol_;       // exp(log_scale) * base_chol_
  // Welford accumulators of the chain path.
  std::int64_t n_obs_ = 0;
  Eigen::VectorXd mean_;
  Eigen::MatrixXd m2_;
  Eigen::VectorXd z_;
  Eigen::VectorXd proposal_;
};

template <class LogTarget>
bool AdaptiveRandomWalk::step(Eigen::VectorXd& state, double& log_target, LogTarget&& f,
                              Rng& rng) {
  boost::random::normal_distribution<double> normal;
  for (int i = 0; i < dim_; ++i) z_[i] = normal(rng);
  proposal_.noalias() = state + chol_.triangularView<Eigen::Lower>() * z_;
  const double proposed = f(proposal_);
  const double log_ratio = proposed - log_target;
  const double accept_prob =
      std::isnan(log_ratio) ? 0.0 : (log_ratio >= 0.0 ? 1.0 : std::exp(log_ratio));
  boost::random::uniform_01<double> unif;
  const bool accepted = unif(rng) < accept_prob;
  if (accepted) {
    state = proposal_;
    log_target = proposed;
  }
  ++n_steps_;
  if (accepted) ++n_accepted_;
  if (!frozen_) adapt(state, accept_prob);
  return accepted;
}

}  // namespace combodose
