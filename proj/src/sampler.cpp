#include "combodose/sampler.hpp"

#include <algorithm>

namespace combodose {

namespace {
// Empirical covariance takes over once this many adapted steps have been
// seen, and is re-factored at this period.
constexpr std::int64_t kCovarianceWarmup = 200;
constexpr std::int64_t kRefreshPeriod = 50;
constexpr double kJitter = 1e-8;
constexpr double kMaxLogScale = 8.0;
}  // namespace

AdaptiveRandomWalk::AdaptiveRandomWalk(const Eigen::VectorXd& initial_sd, double target_acceptance)
    : dim_(static_cast<int>(initial_sd.size())),
      target_(target_acceptance),
      base_chol_(initial_sd.asDiagonal()),
      chol_(base_chol_),
      mean_(Eigen::VectorXd::Zero(dim_)),
      m2_(Eigen::MatrixXd::Zero(dim_, dim_)),
      z_(dim_),
      proposal_(dim_) {}

void AdaptiveRandomWalk::freeze() {
  frozen_ = true;
  n_steps_ = 0;
  n_accepted_ = 0;
}

void AdaptiveRandomWalk::adapt(const Eigen::VectorXd& state, double accept_prob) {
  ++iteration_;
  const double gain = 1.0 / std::pow(static_cast<double>(iteration_) + 1.0, 0.6);
  log_scale_ = std::clamp(log_scale_ + gain * (accept_prob - target_), -kMaxLogScale, kMaxLogScale);

  ++n_obs_;
  const Eigen::VectorXd delta = state - mean_;
  mean_ += delta / static_cast<double>(n_obs_);
  m2_.noalias() += delta * (state - mean_).transpose();

  if (iteration_ >= kCovarianceWarmup && iteration_ % kRefreshPeriod == 0) {
    Eigen::MatrixXd cov = m2_ / static_cast<double>(n_obs_ - 1);
    cov *= 2.38 * 2.38 / dim_;
    for (int i = 0; i < dim_; ++i) cov(i, i) += kJitter;
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() == Eigen::Success) {
      if (!using_empirical_) {
        // Restart the scale search around the new proposal shape.
        log_scale_ = 0.0;
        using_empirical_ = true;
      }
      base_chol_ = llt.matrixL();
    }
  }
  refresh_cholesky();
}

void AdaptiveRandomWalk::refresh_cholesky() { chol_ = std::exp(log_scale_) * base_chol_; }

}  // namespace combodose
