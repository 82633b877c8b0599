#pragma once

#include <algorithm>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mstpp/error.hpp"
#include "mstpp/geo_raster.hpp"
#include "mstpp/hmc.hpp"
#include "mstpp/selection.hpp"

namespace mstpp {

enum class Quantity { ResidenceTime, MovementProbability, Motility };
enum class Statistic { Mean, Q025, Q975 };

inline Quantity parse_quantity(const std::string& s) {
  if (s == "residence_time") return Quantity::ResidenceTime;
  if (s == "movement_probability") return Quantity::MovementProbability;
  if (s == "motility") return Quantity::Motility;
  throw ConfigError("unknown map quantity '" + s + "'");
}

inline Statistic parse_statistic(const std::string& s) {
  if (s == "mean") return Statistic::Mean;
  if (s == "q025") return Statistic::Q025;
  if (s == "q975") return Statistic::Q975;
  throw ConfigError("unknown map statistic '" + s + "'");
}

inline std::string to_string(Quantity q) {
  switch (q) {
    case Quantity::ResidenceTime: return "residence_time";
    case Quantity::MovementProbability: return "movement_probability";
    case Quantity::Motility: return "motility";
  }
  return {};
}

inline std::string to_string(Statistic s) {
  switch (s) {
    case Statistic::Mean: return "mean";
    case Statistic::Q025: return "q025";
    case Statistic::Q975: return "q975";
  }
  return {};
}

/// Residence time is in hours per cell (hours per hectare for 100 m cells).
struct MapRequest {
  Quantity quantity = Quantity::ResidenceTime;
  Statistic statistic = Statistic::Mean;
  double dt = 3.0;
  std::size_t thin = 10;
};

inline double derived_quantity(Quantity q, std::span<const double> w, const Theta& theta, double cellsize, double dt) {
  switch (q) {
    case Quantity::ResidenceTime: return residence_time(w, theta, dt);
    case Quantity::MovementProbability: return psi(w, theta);
    case Quantity::Motility: return motility(w, theta, {cellsize, dt});
  }
  return 0.0;
}

/**
 * Evaluates the quantity at every kept draw (every `thin`-th row) for each
 * valid cell and reduces over draws. The mean map averages r(s; theta_k),
 * it never plugs in the posterior mean of theta. Cells that are nodata in
 * any layer stay nodata.
 */
inline Raster posterior_map(const Chain& chain, const CovariateStack& stack, const MapRequest& req) {
  if (chain.size() == 0) throw DataError("cannot map an empty chain");
  if (req.thin < 1) throw ConfigError("thin must be at least 1");
  if (!(req.dt > 0.0)) throw ConfigError("dt must be positive");
  if (chain.dim() != stack.p())
    throw DataError("chain has " + std::to_string(chain.dim()) + " coefficients but the stack defines " +
                    std::to_string(stack.p()));
  std::vector<Theta> draws;
  for (std::size_t r = 0; r < chain.size(); r += req.thin) draws.emplace_back(chain.draws.row(static_cast<Eigen::Index>(r)).transpose());

  const auto& h = stack.header();
  Raster out = Raster::filled(h, h.nodata);
  std::vector<double> w(stack.p()), vals(draws.size());
  for (int row = 0; row < h.nrows; ++row) {
    for (int col = 0; col < h.ncols; ++col) {
      if (!stack.cell_covariates(row, col, w)) continue;
      for (std::size_t k = 0; k < draws.size(); ++k)
        vals[k] = derived_quantity(req.quantity, w, draws[k], h.cellsize, req.dt);
      double v = 0.0;
      switch (req.statistic) {
        case Statistic::Mean:
          for (double x : vals) v += x;
          v /= static_cast<double>(vals.size());
          break;
        case Statistic::Q025: v = quantile(vals, 0.025); break;
        case Statistic::Q975: v = quantile(vals, 0.975); break;
      }
      out.set(row, col, v);
    }
  }
  return out;
}

struct CoefficientReport {
  std::string name;
  double mean = 0.0;
  double sd = 0.0;
  double q025 = 0.0;
  double q975 = 0.0;
  double p_positive = 0.0;
};

inline std::vector<CoefficientReport> coefficient_report(const Chain& chain, const std::vector<std::string>& names) {
  if (names.size() != chain.dim())
    throw DataError("expected " + std::to_string(chain.dim()) + " coefficient names, got " +
                    std::to_string(names.size()));
  const auto summary = diagnostics(chain);
  std::vector<CoefficientReport> out;
  for (std::size_t k = 0; k < chain.dim(); ++k) {
    const auto& c = summary.coefficients[k];
    std::size_t pos = 0;
    for (std::size_t r = 0; r < chain.size(); ++r)
      pos += chain.draws(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) > 0.0;
    out.push_back({names[k], c.mean, c.sd, c.q025, c.q975, static_cast<double>(pos) / static_cast<double>(chain.size())});
  }
  return out;
}

inline void write_report_text(std::ostream& out, const std::vector<CoefficientReport>& rows) {
  std::size_t width = 11;
  for (const auto& r : rows) width = std::max(width, r.name.size());
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-*s %10s %10s %10s %10s %8s\n", static_cast<int>(width), "coefficient", "mean", "sd",
                "q025", "q975", "P(>0)");
  out << buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%-*s %10.4f %10.4f %10.4f %10.4f %8.4f\n", static_cast<int>(width), r.name.c_str(),
                  r.mean, r.sd, r.q025, r.q975, r.p_positive);
    out << buf;
  }
}

/// Summary with mean, sd, q025, q975, ess, accept_rate and p_positive per coefficient.
inline nlohmann::ordered_json summary_json(const Chain& chain, const std::vector<std::string>& names) {
  const auto diag = diagnostics(chain);
  const auto report = coefficient_report(chain, names);
  nlohmann::ordered_json coefs = nlohmann::ordered_json::object();
  for (std::size_t k = 0; k < names.size(); ++k) {
    const auto& c = diag.coefficients[k];
    coefs[names[k]] = {{"mean", c.mean},       {"sd", c.sd},   {"q025", c.q025},
                       {"q975", c.q975},       {"ess", c.ess}, {"accept_rate", diag.accept_rate},
                       {"p_positive", report[k].p_positive}};
  }
  return {{"coefficients", coefs},
          {"accept_rate", diag.accept_rate},
          {"divergences", diag.divergences},
          {"draws", diag.draws}};
}

}  // namespace mstpp
