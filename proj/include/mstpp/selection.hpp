#pragma once

#include <cmath>
#include <span>
#include <string>
#include <string_view>
#include <utility>

#include <Eigen/Dense>

#include "mstpp/error.hpp"

namespace mstpp {

/// Coefficient vector theta; element 0 is the intercept when the stack has one.
using Theta = Eigen::VectorXd;

inline double linear_predictor(std::span<const double> w, const Theta& theta) {
  double eta = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k) eta += w[k] * theta[static_cast<Eigen::Index>(k)];
  return eta;
}

/// log(1 + exp(x)) without overflow.
inline double softplus(double x) {
  return x > 35.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

inline double inv_logit(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Selection families. Each is a function of eta = w'theta and exposes
// log g, d(log g)/d(eta) and g; the theta-gradient of log g is
// dlog_g(eta) * w for every family.

/**
 * g = 1 / logit^{-1}(eta) = 1 + exp(-eta), the movement-based selection
 * function up to the factors Delta s^2, 4 and Delta t that are shared by
 * every slot of a step and cancel in the conditional likelihood. Raw g
 * values are therefore not comparable to 1/(delta(s) dt) across steps.
 */
struct EdeInverseLogit {
  static constexpr std::string_view tag = "ede";
  static double log_g(double eta) { return softplus(-eta); }
  static double dlog_g(double eta) { return -1.0 / (1.0 + std::exp(eta)); }
  static double g(double eta) { return 1.0 + std::exp(-eta); }
};

struct Exponential {
  static constexpr std::string_view tag = "exp";
  static double log_g(double eta) { return eta; }
  static double dlog_g(double) { return 1.0; }
  static double g(double eta) { return std::exp(eta); }
};

/// Scale of theta is not identifiable under this family.
struct Linear {
  static constexpr std::string_view tag = "linear";
  static double check(double eta) {
    if (!(eta > 0.0)) throw NonPositiveSelection(eta);
    return eta;
  }
  static double log_g(double eta) { return std::log(check(eta)); }
  static double dlog_g(double eta) { return 1.0 / check(eta); }
  static double g(double eta) { return check(eta); }
};

/// Scale of theta is not identifiable under this family.
struct InverseLinear {
  static constexpr std::string_view tag = "invlinear";
  static double log_g(double eta) { return -std::log(Linear::check(eta)); }
  static double dlog_g(double eta) { return -1.0 / Linear::check(eta); }
  static double g(double eta) { return 1.0 / Linear::check(eta); }
};

enum class Family { EdeInverseLogit, Exponential, Linear, InverseLinear };

inline Family parse_family(std::string_view s) {
  if (s == EdeInverseLogit::tag) return Family::EdeInverseLogit;
  if (s == Exponential::tag) return Family::Exponential;
  if (s == Linear::tag) return Family::Linear;
  if (s == InverseLinear::tag) return Family::InverseLinear;
  throw ConfigError("unknown selection family '" + std::string(s) + "' (expected ede, exp, linear or invlinear)");
}

inline bool scale_identifiable(Family f) {
  return f == Family::EdeInverseLogit || f == Family::Exponential;
}

/// Call fn with a value of the policy type matching f.
template <class Fn>
decltype(auto) visit_family(Family f, Fn&& fn) {
  switch (f) {
    case Family::EdeInverseLogit: return std::forward<Fn>(fn)(EdeInverseLogit{});
    case Family::Exponential: return std::forward<Fn>(fn)(Exponential{});
    case Family::Linear: return std::forward<Fn>(fn)(Linear{});
    case Family::InverseLinear: break;
  }
  return std::forward<Fn>(fn)(InverseLinear{});
}

inline std::string_view family_tag(Family f) {
  return visit_family(f, [](auto fam) { return decltype(fam)::tag; });
}

inline double g(Family f, std::span<const double> w, const Theta& theta) {
  const double eta = linear_predictor(w, theta);
  return visit_family(f, [eta](auto fam) { return decltype(fam)::g(eta); });
}

inline double log_g(Family f, std::span<const double> w, const Theta& theta) {
  const double eta = linear_predictor(w, theta);
  return visit_family(f, [eta](auto fam) { return decltype(fam)::log_g(eta); });
}

inline Eigen::VectorXd log_g_grad(Family f, std::span<const double> w, const Theta& theta) {
  const double eta = linear_predictor(w, theta);
  const double d = visit_family(f, [eta](auto fam) { return decltype(fam)::dlog_g(eta); });
  Eigen::VectorXd out(static_cast<Eigen::Index>(w.size()));
  for (std::size_t k = 0; k < w.size(); ++k) out[static_cast<Eigen::Index>(k)] = d * w[k];
  return out;
}

/// Movement probability psi(s) = logit^{-1}(w'theta).
inline double psi(std::span<const double> w, const Theta& theta) {
  return inv_logit(linear_predictor(w, theta));
}

/// Spatial grain (cell side, m) and time step (h) for the motility map.
struct MotilityContext {
  double cellsize;
  double dt;
};

/// delta(s) = cellsize^2 psi(s) / (4 dt), in m^2/h.
inline double motility(std::span<const double> w, const Theta& theta, MotilityContext ctx) {
  return ctx.cellsize * ctx.cellsize * psi(w, theta) / (4.0 * ctx.dt);
}

/// r(s) = 4 dt / psi(s): hours spent per cell of area cellsize^2.
inline double residence_time(std::span<const double> w, const Theta& theta, double dt) {
  return 4.0 * dt / psi(w, theta);
}

}  // namespace mstpp
