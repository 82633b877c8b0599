#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <type_traits>
#include <vector>

#include <Eigen/Dense>

#include "mstpp/availability.hpp"
#include "mstpp/error.hpp"
#include "mstpp/selection.hpp"

namespace mstpp {

/// Gaussian prior N(mu, sigma) on theta.
class Prior {
 public:
  Prior() = default;
  Prior(Eigen::VectorXd mu, Eigen::MatrixXd sigma) : mu_(std::move(mu)), sigma_(std::move(sigma)) {
    if (sigma_.rows() != mu_.size() || sigma_.cols() != mu_.size())
      throw ConfigError("prior covariance must be p x p with p = length of the prior mean");
    if (!sigma_.isApprox(sigma_.transpose(), 1e-12)) throw ConfigError("prior covariance is not symmetric");
    Eigen::LLT<Eigen::MatrixXd> llt(sigma_);
    if (llt.info() != Eigen::Success) throw ConfigError("prior covariance is not positive definite");
    precision_ = llt.solve(Eigen::MatrixXd::Identity(mu_.size(), mu_.size()));
  }

  static Prior diagonal(Eigen::VectorXd mu, const Eigen::VectorXd& variances) {
    if (variances.size() != mu.size()) throw ConfigError("prior mean and variances differ in length");
    for (double v : variances)
      if (!(v > 0.0)) throw ConfigError("prior variances must be positive");
    return Prior(std::move(mu), variances.asDiagonal().toDenseMatrix());
  }

  /// Intercept variance 0.1, unit variance for each covariate, zero mean.
  static Prior default_for(std::size_t p, bool intercept) {
    Eigen::VectorXd var = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(p));
    if (intercept && p > 0) var[0] = 0.1;
    return diagonal(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p)), var);
  }

  std::size_t dim() const { return static_cast<std::size_t>(mu_.size()); }
  const Eigen::VectorXd& mu() const { return mu_; }
  const Eigen::MatrixXd& sigma() const { return sigma_; }

  /// Log density without the normalizing constant.
  double log_density(const Theta& theta) const {
    const Eigen::VectorXd d = theta - mu_;
    return -0.5 * d.dot(precision_ * d);
  }

  Eigen::VectorXd grad(const Theta& theta) const { return -precision_ * (theta - mu_); }

 private:
  Eigen::VectorXd mu_;
  Eigen::MatrixXd sigma_;
  Eigen::MatrixXd precision_;
};

struct LogPosteriorEval {
  double log_lik = 0.0;
  double log_prior = 0.0;
  Eigen::VectorXd grad;
  std::vector<double> per_step_log_lik;

  double log_post() const { return log_lik + log_prior; }
};

namespace detail {

/**
 * log g(w_1) - log sum_j g(w_j) for one frame, adding its theta-gradient to
 * grad when non-null. The denominator is a log-sum-exp over the log g
 * values; for EdeInverseLogit the shift is skipped whenever exp(-eta)
 * cannot overflow, which needs one exp per slot instead of three.
 */
template <class F>
double frame_term(const StepFrame& f, const Theta& theta, AlignedBuffer& scratch, double* grad) {
  const std::size_t J = f.J, p = f.p;
  scratch.resize(2 * J);
  double* a = scratch.data();
  double* b = scratch.data() + J;

  const Eigen::Map<const Eigen::MatrixXd> W(f.covariates.data(), static_cast<Eigen::Index>(J), static_cast<Eigen::Index>(p));
  Eigen::Map<Eigen::VectorXd> eta(a, static_cast<Eigen::Index>(J));
  eta.noalias() = W * theta;

  if constexpr (std::is_same_v<F, EdeInverseLogit>) {
    if (eta.minCoeff() > -600.0) {
      Eigen::Map<Eigen::ArrayXd> e(b, static_cast<Eigen::Index>(J));
      e = (-eta.array()).exp();
      const double sum = static_cast<double>(J) + e.sum();
      if (grad) {
        // d log g_j = -e_j/(1+e_j) w_j with softmax weight (1+e_j)/sum.
        Eigen::Map<Eigen::VectorXd> gr(grad, static_cast<Eigen::Index>(p));
        gr.noalias() += W.transpose() * (e.matrix() / sum);
        gr.noalias() -= (e[0] / (1.0 + e[0])) * W.row(0).transpose();
      }
      return std::log1p(e[0]) - std::log(sum);
    }
  }

  // a <- log g, b <- d log g / d eta
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < J; ++j) {
    try {
      const double eta = a[j];
      a[j] = F::log_g(eta);
      b[j] = F::dlog_g(eta);
    } catch (const NonPositiveSelection& e) {
      throw NonPositiveSelection(e.eta(), f.step_index, j + 1);
    }
    m = std::max(m, a[j]);
  }
  double sum = 0.0;
  for (std::size_t j = 0; j < J; ++j) sum += std::exp(a[j] - m);
  const double lse = m + std::log(sum);
  if (grad) {
    for (std::size_t k = 0; k < p; ++k) grad[k] += b[0] * f.at(0, k);
    for (std::size_t j = 0; j < J; ++j) {
      const double c = -std::exp(a[j] - lse) * b[j];
      for (std::size_t k = 0; k < p; ++k) grad[k] += c * f.at(j, k);
    }
  }
  return a[0] - lse;
}

template <class F>
double cond_log_lik_impl(const AugmentedDataset& data, const Theta& theta, double* grad,
                         std::vector<double>* per_step) {
  if (static_cast<std::size_t>(theta.size()) != data.p && !data.frames.empty())
    throw DataError("theta length does not match covariate dimension");
  AlignedBuffer scratch;
  double total = 0.0;
  if (per_step) per_step->assign(data.frames.size(), 0.0);
  for (std::size_t i = 0; i < data.frames.size(); ++i) {
    const double term = frame_term<F>(data.frames[i], theta, scratch, grad);
    if (per_step) (*per_step)[i] = term;
    total += term;
  }
  return total;
}

}  // namespace detail

/// Conditional (step-selection) log-likelihood summed over steps in index order.
inline double cond_log_lik(const AugmentedDataset& data, Family family, const Theta& theta,
                           std::vector<double>* per_step = nullptr) {
  return visit_family(family, [&](auto fam) {
    return detail::cond_log_lik_impl<decltype(fam)>(data, theta, nullptr, per_step);
  });
}

/// Per-step conditional probability g_1 / sum_j g_j.
inline double step_likelihood(const StepFrame& frame, Family family, const Theta& theta) {
  AlignedBuffer scratch;
  return std::exp(visit_family(family, [&](auto fam) {
    return detail::frame_term<decltype(fam)>(frame, theta, scratch, nullptr);
  }));
}

inline constexpr std::size_t kMaxEnumerationJ = 20;

/**
 * Brute-force Bernoulli route: y_j ~ Bern(phi_j) with logit(phi_j) =
 * beta0 + log g(w_j), then [y | beta0, theta] over the sum of the same
 * probability across all J one-hot configurations. The result must not
 * depend on beta0.
 */
inline double bernoulli_conditional_oracle(const StepFrame& frame, Family family, const Theta& theta, double beta0) {
  const std::size_t J = frame.J;
  if (J > kMaxEnumerationJ)
    throw EnumerationTooLarge("Bernoulli enumeration is limited to J <= " + std::to_string(kMaxEnumerationJ));
  std::vector<double> log_phi(J), log_one_minus(J);
  for (std::size_t j = 0; j < J; ++j) {
    const double a = beta0 + log_g(family, frame.w(j), theta);
    log_phi[j] = -softplus(-a);
    log_one_minus[j] = -softplus(a);
  }
  std::vector<double> config_log_prob(J);
  std::vector<int> y(J);
  for (std::size_t k = 0; k < J; ++k) {
    std::fill(y.begin(), y.end(), 0);
    y[k] = 1;
    double lp = 0.0;
    for (std::size_t j = 0; j < J; ++j) lp += y[j] ? log_phi[j] : log_one_minus[j];
    config_log_prob[k] = lp;
  }
  const double m = *std::max_element(config_log_prob.begin(), config_log_prob.end());
  double denom = 0.0;
  for (double lp : config_log_prob) denom += std::exp(lp - m);
  return std::exp(config_log_prob[0] - m) / denom;  // observed configuration is y_1 = 1
}

/// Multinomial cell probabilities phi_j = g_j / sum_l g_l.
inline std::vector<double> multinomial_probabilities(const StepFrame& frame, Family family, const Theta& theta) {
  std::vector<double> phi(frame.J);
  double sum = 0.0;
  for (std::size_t j = 0; j < frame.J; ++j) sum += phi[j] = g(family, frame.w(j), theta);
  for (double& v : phi) v /= sum;
  return phi;
}

/// Multinomial route: likelihood of the observed slot, phi_1.
inline double multinomial_oracle(const StepFrame& frame, Family family, const Theta& theta) {
  return multinomial_probabilities(frame, family, theta).front();
}

/**
 * Log posterior of theta: conditional log-likelihood plus the Gaussian prior
 * (normalizing constant dropped), with its analytic gradient.
 */
class LogPosterior {
 public:
  LogPosterior(const AugmentedDataset& data, Family family, Prior prior)
      : data_(&data), family_(family), prior_(std::move(prior)) {
    if (!data.frames.empty() && prior_.dim() != data.p)
      throw ConfigError("prior dimension " + std::to_string(prior_.dim()) + " does not match covariate dimension " +
                        std::to_string(data.p));
  }

  std::size_t dim() const { return prior_.dim(); }
  Family family() const { return family_; }
  const Prior& prior() const { return prior_; }
  const AugmentedDataset& data() const { return *data_; }

  LogPosteriorEval evaluate(const Theta& theta, bool keep_per_step = false) const {
    LogPosteriorEval out;
    out.grad = Eigen::VectorXd::Zero(theta.size());
    out.log_lik = visit_family(family_, [&](auto fam) {
      return detail::cond_log_lik_impl<decltype(fam)>(*data_, theta, out.grad.data(),
                                                      keep_per_step ? &out.per_step_log_lik : nullptr);
    });
    out.log_prior = prior_.log_density(theta);
    out.grad += prior_.grad(theta);
    return out;
  }

  double value(const Theta& theta) const {
    return cond_log_lik(*data_, family_, theta) + prior_.log_density(theta);
  }

 private:
  const AugmentedDataset* data_;
  Family family_;
  Prior prior_;
};

inline LogPosteriorEval log_posterior(const AugmentedDataset& data, Family family, const Theta& theta,
                                      const Prior& prior) {
  return LogPosterior(data, family, prior).evaluate(theta);
}

}  // namespace mstpp
