#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mstpp/availability.hpp"
#include "mstpp/hmc.hpp"
#include "mstpp/likelihood.hpp"
#include "mstpp/rng.hpp"
#include "mstpp/selection.hpp"

namespace mstpp {

/// N(mu, Sigma) log density (up to a constant) as a sampler target.
class GaussianTarget {
 public:
  GaussianTarget(Eigen::VectorXd mu, const Eigen::MatrixXd& sigma)
      : mu_(std::move(mu)), precision_(sigma.llt().solve(Eigen::MatrixXd::Identity(sigma.rows(), sigma.cols()))) {}

  static GaussianTarget standard(std::size_t p) {
    const auto n = static_cast<Eigen::Index>(p);
    return {Eigen::VectorXd::Zero(n), Eigen::MatrixXd::Identity(n, n)};
  }

  std::size_t dim() const { return static_cast<std::size_t>(mu_.size()); }

  LogPosteriorEval evaluate(const Theta& theta) const {
    LogPosteriorEval e;
    const Eigen::VectorXd d = theta - mu_;
    e.log_prior = -0.5 * d.dot(precision_ * d);
    e.grad = -precision_ * d;
    return e;
  }

 private:
  Eigen::VectorXd mu_;
  Eigen::MatrixXd precision_;
};

/// Wraps a target and scales its gradient; used to prove the checks can fail.
template <class Target>
class CorruptedGradient {
 public:
  CorruptedGradient(const Target& t, double factor) : t_(&t), factor_(factor) {}
  std::size_t dim() const { return t_->dim(); }
  LogPosteriorEval evaluate(const Theta& theta) const {
    auto e = t_->evaluate(theta);
    e.grad *= factor_;
    return e;
  }

 private:
  const Target* t_;
  double factor_;
};

/// Random frames and a theta for which every family is defined (eta > 0).
struct RandomInstance {
  AugmentedDataset data;
  Theta theta;
  Family family = Family::EdeInverseLogit;
};

inline RandomInstance random_instance(Rng& rng, Family family, std::size_t n_frames, std::size_t J, std::size_t p) {
  const bool positive = family == Family::Linear || family == Family::InverseLinear;
  std::uniform_real_distribution<double> cov(positive ? 0.2 : -2.0, 2.0);
  std::uniform_real_distribution<double> coef(positive ? 0.1 : -1.5, 1.5);
  RandomInstance inst;
  inst.family = family;
  inst.data.J = J;
  inst.data.p = p;
  for (std::size_t i = 0; i < n_frames; ++i) {
    StepFrame f;
    f.step_index = i + 2;
    f.J = J;
    f.p = p;
    f.delta_bar = 1.0;
    f.dt = 1.0;
    f.covariates.resize(J * p);
    for (double& v : f.covariates) v = cov(rng);
    f.positions.assign(J, Position{});
    inst.data.frames.push_back(std::move(f));
  }
  inst.theta.resize(static_cast<Eigen::Index>(p));
  for (Eigen::Index k = 0; k < inst.theta.size(); ++k) inst.theta[k] = coef(rng);
  return inst;
}

/// n_frames in [2,10], J in [2,12], p in [1,4], family cycling through all four.
inline RandomInstance random_instance(Rng& rng, std::size_t index) {
  static constexpr Family kFamilies[] = {Family::EdeInverseLogit, Family::Exponential, Family::Linear,
                                         Family::InverseLinear};
  std::uniform_int_distribution<std::size_t> n(2, 10), J(2, 12), p(1, 4);
  const std::size_t nn = n(rng), jj = J(rng), pp = p(rng);
  return random_instance(rng, kFamilies[index % 4], nn, jj, pp);
}

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

namespace detail {

inline std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

}  // namespace detail

/// Largest pairwise gap between the three step-likelihood routes.
inline double triangle_gap(const StepFrame& frame, Family family, const Theta& theta) {
  const double a = step_likelihood(frame, family, theta);
  const double b = bernoulli_conditional_oracle(frame, family, theta, 0.0);
  const double c = multinomial_oracle(frame, family, theta);
  return std::max({std::abs(a - b), std::abs(a - c), std::abs(b - c)});
}

inline CheckResult check_likelihood_triangle(std::size_t instances, std::uint64_t seed) {
  Rng rng = substream(seed, 1);
  double worst = 0.0;
  for (std::size_t k = 0; k < instances; ++k) {
    const auto inst = random_instance(rng, k);
    for (const auto& f : inst.data.frames) worst = std::max(worst, triangle_gap(f, inst.family, inst.theta));
  }
  return {"likelihood triangle", worst < 1e-12, "max gap " + detail::fmt("%.3g", worst)};
}

inline CheckResult check_beta0_invariance(std::size_t instances, std::uint64_t seed) {
  Rng rng = substream(seed, 2);
  double worst = 0.0;
  for (std::size_t k = 0; k < instances; ++k) {
    const auto inst = random_instance(rng, k);
    for (const auto& f : inst.data.frames) {
      const double ref = bernoulli_conditional_oracle(f, inst.family, inst.theta, 0.0);
      for (double b0 : {-5.0, 5.0})
        worst = std::max(worst, std::abs(bernoulli_conditional_oracle(f, inst.family, inst.theta, b0) - ref));
    }
  }
  return {"beta0 cancellation", worst < 1e-12, "max change " + detail::fmt("%.3g", worst)};
}

/**
 * Exponential: adding a constant to every slot's first covariate (an
 * intercept column) leaves the likelihood unchanged. Linear and inverse
 * linear: theta -> c theta for c in {0.5, 2, 10}.
 */
inline CheckResult check_identifiability(std::size_t instances, std::uint64_t seed) {
  Rng rng = substream(seed, 3);
  double worst = 0.0;
  for (std::size_t k = 0; k < instances; ++k) {
    auto ex = random_instance(rng, Family::Exponential, 5, 8, 3);
    for (auto& f : ex.data.frames)
      for (std::size_t j = 0; j < f.J; ++j) f.covariates[j] = 1.0;
    const double base = cond_log_lik(ex.data, ex.family, ex.theta);
    Theta shifted = ex.theta;
    shifted[0] += 2.5;
    worst = std::max(worst, std::abs(cond_log_lik(ex.data, ex.family, shifted) - base));

    for (Family fam : {Family::Linear, Family::InverseLinear}) {
      const auto inst = random_instance(rng, fam, 5, 8, 3);
      const double ref = cond_log_lik(inst.data, fam, inst.theta);
      for (double c : {0.5, 2.0, 10.0})
        worst = std::max(worst, std::abs(cond_log_lik(inst.data, fam, Theta(c * inst.theta)) - ref));
    }
  }
  return {"identifiability invariances", worst < 1e-10, "max change " + detail::fmt("%.3g", worst)};
}

/// Central differences with step 1e-5 (1 + |theta_k|).
template <class Target>
Eigen::VectorXd finite_difference_gradient(const Target& target, const Theta& theta) {
  Eigen::VectorXd g(theta.size());
  for (Eigen::Index k = 0; k < theta.size(); ++k) {
    const double h = 1e-5 * (1.0 + std::abs(theta[k]));
    Theta up = theta, dn = theta;
    up[k] += h;
    dn[k] -= h;
    g[k] = (target.evaluate(up).log_post() - target.evaluate(dn).log_post()) / (2.0 * h);
  }
  return g;
}

/// Relative error with an absolute floor near zero components.
inline bool gradient_matches(const Eigen::VectorXd& analytic, const Eigen::VectorXd& numeric, double* worst) {
  bool ok = true;
  for (Eigen::Index k = 0; k < analytic.size(); ++k) {
    const double diff = std::abs(analytic[k] - numeric[k]);
    const double scale = std::max(std::abs(analytic[k]), std::abs(numeric[k]));
    const bool pass = diff < 1e-8 || diff < 1e-5 * scale;
    const double rel = scale > 0.0 ? diff / scale : diff;
    if (worst) *worst = std::max(*worst, pass ? 0.0 : rel);
    ok = ok && pass;
  }
  return ok;
}

inline CheckResult check_gradient(std::size_t instances, std::uint64_t seed, double corrupt = 1.0) {
  Rng rng = substream(seed, 4);
  bool ok = true;
  double worst = 0.0;
  for (std::size_t k = 0; k < instances; ++k) {
    const auto inst = random_instance(rng, k);
    const LogPosterior lp(inst.data, inst.family, Prior::default_for(inst.data.p, true));
    const CorruptedGradient<LogPosterior> target(lp, corrupt);
    ok = gradient_matches(target.evaluate(inst.theta).grad, finite_difference_gradient(lp, inst.theta), &worst) && ok;
  }
  return {"gradient vs finite differences", ok, "worst failing rel. error " + detail::fmt("%.3g", worst)};
}

/// Forward L steps, negate v, L steps back: distance to the start.
template <class Target>
double reversibility_error(const Target& target, const Theta& theta, const Eigen::VectorXd& v, double step_size,
                           std::size_t n_steps, const MassMatrix& mass) {
  const auto fwd = leapfrog(theta, v, target, step_size, n_steps, mass);
  const auto back = leapfrog(fwd.theta, Eigen::VectorXd(-fwd.v), target, step_size, n_steps, mass);
  return std::max((back.theta - theta).cwiseAbs().maxCoeff(), (back.v + v).cwiseAbs().maxCoeff());
}

/// Largest |h(tau) - h(0)| along a trajectory of total time `time`.
template <class Target>
double max_energy_error(const Target& target, const Theta& theta, const Eigen::VectorXd& v, double step_size,
                        double time, const MassMatrix& mass) {
  const auto steps = static_cast<std::size_t>(std::llround(time / step_size));
  LeapfrogResult s{theta, v, target.evaluate(theta), 0};
  const double h0 = -s.end.log_post() + mass.kinetic(v);
  double worst = 0.0;
  for (std::size_t k = 0; k < steps; ++k) {
    s = leapfrog(s.theta, s.v, target, step_size, 1, mass, &s.end);
    worst = std::max(worst, std::abs(-s.end.log_post() + mass.kinetic(s.v) - h0));
  }
  return worst;
}

inline CheckResult check_leapfrog_reversibility(std::size_t instances, std::uint64_t seed, double corrupt = 1.0) {
  Rng rng = substream(seed, 5);
  double worst = 0.0;
  const MassMatrix mass(3.0 * Eigen::MatrixXd::Identity(3, 3));
  for (std::size_t k = 0; k < instances; ++k) {
    const auto inst = random_instance(rng, Family::EdeInverseLogit, 6, 10, 3);
    const LogPosterior lp(inst.data, inst.family, Prior::default_for(3, true));
    const CorruptedGradient<LogPosterior> target(lp, corrupt);
    worst = std::max(worst, reversibility_error(target, inst.theta, mass.draw(rng), 0.05, 40, mass));
  }
  return {"leapfrog reversibility", worst < 1e-8, "max error " + detail::fmt("%.3g", worst)};
}

/**
 * Energy error on N(0, I) with momentum covariance 3 I at step sizes 0.05
 * and 0.0125 over time 10. A gradient scaled away from the truth breaks
 * energy conservation at O(1), so the ratio leaves [12, 20].
 */
inline CheckResult check_energy_order(std::uint64_t seed, double corrupt = 1.0) {
  Rng rng = substream(seed, 6);
  const auto gauss = GaussianTarget::standard(3);
  const CorruptedGradient<GaussianTarget> target(gauss, corrupt);
  const MassMatrix mass(3.0 * Eigen::MatrixXd::Identity(3, 3));
  Theta theta(3);
  theta << 0.7, -1.1, 0.3;
  const Eigen::VectorXd v = mass.draw(rng);
  const double coarse = max_energy_error(target, theta, v, 0.05, 10.0, mass);
  const double fine = max_energy_error(target, theta, v, 0.0125, 10.0, mass);
  const double ratio = coarse / fine;
  return {"leapfrog energy order 2", ratio >= 12.0 && ratio <= 20.0, "error ratio " + detail::fmt("%.4g", ratio)};
}

/// The suite behind `mstpp check`. corrupt != 1 scales every analytic gradient.
inline std::vector<CheckResult> run_checks(std::uint64_t seed = 20240601, double corrupt = 1.0) {
  return {check_likelihood_triangle(200, seed), check_beta0_invariance(50, seed),  check_identifiability(50, seed),
          check_gradient(50, seed, corrupt),    check_leapfrog_reversibility(20, seed, corrupt),
          check_energy_order(seed, corrupt)};
}

inline void print_checks(std::ostream& out, const std::vector<CheckResult>& results) {
  char buf[256];
  for (const auto& r : results) {
    std::snprintf(buf, sizeof buf, "%-4s  %-32s %s\n", r.passed ? "PASS" : "FAIL", r.name.c_str(), r.detail.c_str());
    out << buf;
  }
}

}  // namespace mstpp
