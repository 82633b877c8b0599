#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mstpp/error.hpp"
#include "mstpp/likelihood.hpp"
#include "mstpp/rng.hpp"
#include "mstpp/telemetry.hpp"

namespace mstpp {

/**
 * Sampler settings. Defaults are step size 0.05, trajectory time 10,
 * 20000 iterations with 1000 burn-in and momentum covariance 3 I.
 * An empty mass_matrix means 3 I of the target's dimension.
 */
struct HmcConfig {
  double step_size = 0.05;
  double trajectory_time = 10.0;
  std::size_t iterations = 20000;
  std::size_t burn_in = 1000;
  Eigen::MatrixXd mass_matrix;
  std::uint64_t seed = 1;
  Theta theta_init;
  bool mh_correction = true;

  void validate() const {
    if (!(step_size > 0.0)) throw ConfigError("step_size must be positive");
    if (!(trajectory_time >= step_size)) throw ConfigError("trajectory_time must be at least step_size");
    if (burn_in >= iterations) throw ConfigError("burn_in must be smaller than iterations");
  }

  std::size_t leapfrog_steps() const {
    return static_cast<std::size_t>(std::llround(trajectory_time / step_size));
  }
};

/// Momentum covariance Sigma_v with its inverse and Cholesky factor.
class MassMatrix {
 public:
  explicit MassMatrix(const Eigen::MatrixXd& sigma) : sigma_(sigma) {
    Eigen::LLT<Eigen::MatrixXd> llt(sigma_);
    if (sigma_.rows() != sigma_.cols() || llt.info() != Eigen::Success)
      throw ConfigError("mass matrix must be symmetric positive definite");
    chol_ = llt.matrixL();
    inverse_ = llt.solve(Eigen::MatrixXd::Identity(sigma_.rows(), sigma_.cols()));
  }

  static MassMatrix resolve(const HmcConfig& cfg, std::size_t dim) {
    if (cfg.mass_matrix.size() == 0)
      return MassMatrix(3.0 * Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim)));
    if (static_cast<std::size_t>(cfg.mass_matrix.rows()) != dim)
      throw ConfigError("mass matrix dimension does not match theta");
    return MassMatrix(cfg.mass_matrix);
  }

  double kinetic(const Eigen::VectorXd& v) const { return 0.5 * v.dot(inverse_ * v); }
  /// d theta / d tau = Sigma_v^{-1} v.
  Eigen::VectorXd velocity(const Eigen::VectorXd& v) const { return inverse_ * v; }

  Eigen::VectorXd draw(Rng& rng) const {
    std::normal_distribution<double> normal;
    Eigen::VectorXd z(sigma_.rows());
    for (Eigen::Index k = 0; k < z.size(); ++k) z[k] = normal(rng);
    return chol_ * z;
  }

 private:
  Eigen::MatrixXd sigma_, inverse_, chol_;
};

/// h(theta, v) = -log posterior(theta) + v' Sigma_v^{-1} v / 2.
template <class Target>
double hamiltonian(const Theta& theta, const Eigen::VectorXd& v, const Target& target, const MassMatrix& mass) {
  return -target.evaluate(theta).log_post() + mass.kinetic(v);
}

struct LeapfrogResult {
  Theta theta;
  Eigen::VectorXd v;
  LogPosteriorEval end;
  std::size_t grad_evals = 0;
};

namespace detail {

inline bool all_finite(const Eigen::VectorXd& x) { return x.allFinite(); }

}  // namespace detail

/**
 * Integrate n_steps leapfrog steps of size step_size: half-step v along the
 * log-posterior gradient, full-step theta by Sigma_v^{-1} v, half-step v.
 * Pass the evaluation at theta as `start` to save one gradient; the
 * endpoint gradient of each step is reused by the next. Throws
 * NonFiniteTrajectory on divergence.
 */
template <class Target>
LeapfrogResult leapfrog(const Theta& theta, const Eigen::VectorXd& v, const Target& target, double step_size,
                        std::size_t n_steps, const MassMatrix& mass, const LogPosteriorEval* start = nullptr) {
  LeapfrogResult r{theta, v, {}, 0};
  if (start) {
    r.end = *start;
  } else {
    r.end = target.evaluate(theta);
    ++r.grad_evals;
  }
  const double half = 0.5 * step_size;
  for (std::size_t s = 0; s < n_steps; ++s) {
    r.v += half * r.end.grad;
    r.theta += step_size * mass.velocity(r.v);
    if (!detail::all_finite(r.theta)) throw NonFiniteTrajectory("leapfrog position became non-finite");
    r.end = target.evaluate(r.theta);
    ++r.grad_evals;
    r.v += half * r.end.grad;
    if (!detail::all_finite(r.v) || !std::isfinite(r.end.log_post()))
      throw NonFiniteTrajectory("leapfrog trajectory diverged");
  }
  return r;
}

template <class Target>
LeapfrogResult leapfrog(const Theta& theta, const Eigen::VectorXd& v, const Target& target, const HmcConfig& cfg) {
  cfg.validate();
  return leapfrog(theta, v, target, cfg.step_size, cfg.leapfrog_steps(), MassMatrix::resolve(cfg, target.dim()));
}

/// Post-burn-in draws (one row per kept iteration) plus per-iteration traces.
struct Chain {
  Eigen::MatrixXd draws;
  std::vector<std::size_t> iteration;  // 1-based iteration number of each kept row
  std::vector<double> log_post;
  std::vector<std::uint8_t> accepted;
  std::vector<double> energy_trace;  // h(theta, v) at the start of every iteration
  double accept_rate = 0.0;          // over all iterations, burn-in included
  std::size_t divergences = 0;
  std::uint64_t seed = 0;

  std::size_t size() const { return static_cast<std::size_t>(draws.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(draws.cols()); }
};

/**
 * Hamiltonian Monte Carlo. Each iteration refreshes v ~ N(0, Sigma_v),
 * integrates the trajectory and, when mh_correction is set, accepts with
 * probability min(1, exp(h_start - h_end)). Without the correction every
 * finite trajectory is accepted. Divergent trajectories count as
 * rejections. theta_init defaults to the prior mean when the target has one.
 */
template <class Target>
Chain sample(const Target& target, const HmcConfig& cfg) {
  cfg.validate();
  const std::size_t p = target.dim();
  const MassMatrix mass = MassMatrix::resolve(cfg, p);
  Theta theta = cfg.theta_init;
  if (theta.size() == 0) {
    if constexpr (requires { target.prior().mu(); })
      theta = target.prior().mu();
    else
      theta = Theta::Zero(static_cast<Eigen::Index>(p));
  }
  if (static_cast<std::size_t>(theta.size()) != p) throw ConfigError("theta_init has the wrong length");

  LogPosteriorEval current;
  try {
    current = target.evaluate(theta);
  } catch (const Error& e) {
    throw InitializationFailure(std::string("posterior not evaluable at theta_init: ") + e.what());
  }
  if (!theta.allFinite() || !std::isfinite(current.log_post()) || !current.grad.allFinite())
    throw InitializationFailure("posterior is not finite at theta_init");

  Rng rng = substream(cfg.seed, kSamplerStream);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const std::size_t n_steps = cfg.leapfrog_steps();
  const std::size_t kept = cfg.iterations - cfg.burn_in;

  Chain chain;
  chain.seed = cfg.seed;
  chain.draws.resize(static_cast<Eigen::Index>(kept), static_cast<Eigen::Index>(p));
  chain.iteration.reserve(kept);
  chain.log_post.reserve(kept);
  chain.accepted.reserve(kept);
  chain.energy_trace.reserve(cfg.iterations);
  std::size_t n_accepted = 0;

  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    const Eigen::VectorXd v0 = mass.draw(rng);
    const double h0 = -current.log_post() + mass.kinetic(v0);
    chain.energy_trace.push_back(h0);
    const double u = unif(rng);

    bool accept = false;
    try {
      auto prop = leapfrog(theta, v0, target, cfg.step_size, n_steps, mass, &current);
      const double h1 = -prop.end.log_post() + mass.kinetic(prop.v);
      accept = !cfg.mh_correction || (std::isfinite(h1) && std::log(u) < h0 - h1);
      if (!std::isfinite(h1)) ++chain.divergences;
      if (accept) {
        theta = std::move(prop.theta);
        current = std::move(prop.end);
      }
    } catch (const NonFiniteTrajectory&) {
      ++chain.divergences;
    } catch (const NonPositiveSelection&) {
      ++chain.divergences;
    }
    n_accepted += accept;

    if (it >= cfg.burn_in) {
      const auto row = static_cast<Eigen::Index>(it - cfg.burn_in);
      chain.draws.row(row) = theta.transpose();
      chain.iteration.push_back(it + 1);
      chain.log_post.push_back(current.log_post());
      chain.accepted.push_back(accept ? 1 : 0);
    }
  }
  chain.accept_rate = static_cast<double>(n_accepted) / static_cast<double>(cfg.iterations);
  return chain;
}

/// Empirical quantile with linear interpolation between order statistics.
inline double quantile(std::vector<double> x, double q) {
  if (x.empty()) return std::nan("");
  std::sort(x.begin(), x.end());
  const double h = q * static_cast<double>(x.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, x.size() - 1);
  return x[lo] + (h - static_cast<double>(lo)) * (x[hi] - x[lo]);
}

/**
 * ESS = N / tau with tau = -1 + 2 sum_m (rho_{2m} + rho_{2m+1}), summing the
 * paired autocorrelations while they stay positive. A constant series has
 * ESS 1.
 */
inline double effective_sample_size(std::span<const double> x) {
  const std::size_t n = x.size();
  if (n < 2) return static_cast<double>(n);
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(n);
  std::vector<double> d(n);
  for (std::size_t t = 0; t < n; ++t) d[t] = x[t] - mean;
  auto autocov = [&](std::size_t lag) {
    double s = 0.0;
    for (std::size_t t = 0; t + lag < n; ++t) s += d[t] * d[t + lag];
    return s / static_cast<double>(n);
  };
  const double gamma0 = autocov(0);
  if (!(gamma0 > 0.0)) return 1.0;
  double tau = -1.0;
  for (std::size_t m = 0; 2 * m + 1 < n; ++m) {
    const double pair = (autocov(2 * m) + autocov(2 * m + 1)) / gamma0;
    if (!(pair > 0.0)) break;
    tau += 2.0 * pair;
  }
  // Antithetic chains can exceed n; cap at n log10(n).
  const double nd = static_cast<double>(n);
  return std::min(nd / std::max(tau, 1.0 / nd), nd * std::log10(nd));
}

struct CoefficientSummary {
  double mean = 0.0;
  double sd = 0.0;
  double q025 = 0.0;
  double q975 = 0.0;
  double ess = 0.0;
};

struct ChainSummary {
  std::vector<CoefficientSummary> coefficients;
  double accept_rate = 0.0;
  std::size_t divergences = 0;
  std::size_t draws = 0;
};

inline std::vector<double> column(const Chain& chain, std::size_t k) {
  std::vector<double> out(chain.size());
  for (std::size_t r = 0; r < chain.size(); ++r)
    out[r] = chain.draws(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k));
  return out;
}

/// Per-coordinate mean, sd (divide by N-1), central 95% interval and ESS.
inline ChainSummary diagnostics(const Chain& chain) {
  if (chain.size() == 0) throw DataError("cannot summarise an empty chain");
  ChainSummary s;
  s.accept_rate = chain.accept_rate;
  s.divergences = chain.divergences;
  s.draws = chain.size();
  const double n = static_cast<double>(chain.size());
  for (std::size_t k = 0; k < chain.dim(); ++k) {
    const auto x = column(chain, k);
    CoefficientSummary c;
    for (double v : x) c.mean += v;
    c.mean /= n;
    double ss = 0.0;
    for (double v : x) ss += (v - c.mean) * (v - c.mean);
    c.sd = x.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    c.q025 = quantile(x, 0.025);
    c.q975 = quantile(x, 0.975);
    c.ess = effective_sample_size(x);
    s.coefficients.push_back(c);
  }
  return s;
}

/// CSV with header iter,theta_0,...,theta_{p-1},log_post,accepted.
inline void write_chain_csv(std::ostream& out, const Chain& chain) {
  out << "iter";
  for (std::size_t k = 0; k < chain.dim(); ++k) out << ",theta_" << k;
  out << ",log_post,accepted\n";
  char buf[40];
  for (std::size_t r = 0; r < chain.size(); ++r) {
    out << chain.iteration[r];
    for (std::size_t k = 0; k < chain.dim(); ++k) {
      std::snprintf(buf, sizeof buf, ",%.17g", chain.draws(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)));
      out << buf;
    }
    std::snprintf(buf, sizeof buf, ",%.17g", chain.log_post[r]);
    out << buf << ',' << int(chain.accepted[r]) << '\n';
  }
}

inline void write_chain_csv(const std::string& path, const Chain& chain) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write chain '" + path + "'");
  write_chain_csv(out, chain);
}

/// Reads the draws back; accept_rate is recomputed from the kept rows.
inline Chain read_chain_csv(std::istream& in, const std::string& source = "<stream>") {
  std::string line;
  std::size_t lineno = 1;
  if (!std::getline(in, line)) throw ParseError(source, 1, "empty chain file");
  auto header = detail::split_csv(line);
  if (header.size() < 4 || header.front() != "iter" || header[header.size() - 2] != "log_post" ||
      header.back() != "accepted")
    throw ParseError(source, 1, "expected header iter,theta_0,...,log_post,accepted");
  const std::size_t p = header.size() - 3;
  std::vector<std::vector<double>> rows;
  Chain chain;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    auto cells = detail::split_csv(line);
    if (cells.size() != p + 3) throw ParseError(source, lineno, "wrong number of fields");
    std::vector<double> vals;
    for (const auto& c : cells) {
      auto v = detail::parse_number(c);
      if (!v) throw ParseError(source, lineno, "non-numeric field '" + c + "'");
      vals.push_back(*v);
    }
    chain.iteration.push_back(static_cast<std::size_t>(vals[0]));
    chain.log_post.push_back(vals[p + 1]);
    chain.accepted.push_back(vals[p + 2] != 0.0);
    rows.emplace_back(vals.begin() + 1, vals.begin() + 1 + static_cast<std::ptrdiff_t>(p));
  }
  if (rows.empty()) throw ParseError(source, lineno, "chain has no draws");
  chain.draws.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(p));
  std::size_t acc = 0;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t k = 0; k < p; ++k)
      chain.draws(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = rows[r][k];
    acc += chain.accepted[r];
  }
  chain.accept_rate = static_cast<double>(acc) / static_cast<double>(rows.size());
  return chain;
}

inline Chain read_chain_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open chain '" + path + "'");
  return read_chain_csv(in, path);
}

}  // namespace mstpp
