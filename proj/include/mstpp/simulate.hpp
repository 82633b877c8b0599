#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "mstpp/availability.hpp"
#include "mstpp/error.hpp"
#include "mstpp/geo_raster.hpp"
#include "mstpp/rng.hpp"
#include "mstpp/selection.hpp"
#include "mstpp/telemetry.hpp"

namespace mstpp {

/// How the simulator chooses the homogenized motility for each step.
struct DeltaBarMode {
  enum class Kind { HarmonicLocal, Fixed };
  Kind kind = Kind::HarmonicLocal;
  double radius = 0.0;  // m; 0 means 5 * cellsize
  double value = 0.0;   // m^2/h, Fixed only
};

struct SimConfig {
  Theta theta_true;
  std::size_t n_steps = 0;
  double dt = 3.0;
  Position start;
  DeltaBarMode delta_bar_mode;
  std::uint64_t seed = 1;
};

/**
 * Harmonic mean of delta(c) = cellsize^2 psi(c) / (4 dt) over the valid
 * cell centres within `radius` of `center`.
 */
inline double local_harmonic_delta_bar(const CovariateStack& stack, const Theta& theta, Position center,
                                       double radius, MotilityContext ctx) {
  const auto& h = stack.header();
  const int reach = static_cast<int>(std::ceil(radius / h.cellsize)) + 1;
  // Centre may sit outside the extent; scan the clipped bounding box either way.
  const int col0 = static_cast<int>(std::floor((center.x - h.xll) / h.cellsize));
  const int row0 = h.nrows - 1 - static_cast<int>(std::floor((center.y - h.yll) / h.cellsize));
  std::vector<double> w(stack.p());
  double inv_sum = 0.0;
  std::size_t m = 0;
  for (int r = std::max(0, row0 - reach); r <= std::min(h.nrows - 1, row0 + reach); ++r) {
    for (int c = std::max(0, col0 - reach); c <= std::min(h.ncols - 1, col0 + reach); ++c) {
      const Position cc = h.cell_center(r, c);
      const double dx = cc.x - center.x, dy = cc.y - center.y;
      if (dx * dx + dy * dy > radius * radius) continue;
      if (!stack.cell_covariates(r, c, w)) continue;
      inv_sum += 1.0 / motility(w, theta, ctx);
      ++m;
    }
  }
  if (m == 0) throw NoValidCells("no valid cells within the harmonic-mean radius");
  return static_cast<double>(m) / inv_sum;
}

/**
 * Bound for the rejection step: log of the largest EdeInverseLogit g over
 * every valid cell. g is piecewise constant on the grid, so this is exact.
 */
inline double log_selection_max(const CovariateStack& stack, const Theta& theta) {
  const auto& h = stack.header();
  std::vector<double> w(stack.p());
  double best = -std::numeric_limits<double>::infinity();
  for (int r = 0; r < h.nrows; ++r)
    for (int c = 0; c < h.ncols; ++c)
      if (stack.cell_covariates(r, c, w)) best = std::max(best, EdeInverseLogit::log_g(linear_predictor(w, theta)));
  if (!std::isfinite(best)) throw NoValidCells("covariate stack has no valid cells");
  return best;
}

inline constexpr std::size_t kMaxStepProposals = 1'000'000;

struct StepDraw {
  Position position;
  std::size_t proposals = 0;
};

/**
 * Exact draw from density proportional to g(w(s), theta) N(s; s_prev,
 * 2 delta_bar dt I) on the valid cells: Gaussian proposals off the grid or
 * on nodata are redrawn, the rest accepted with probability g / g_max.
 */
inline StepDraw step_sample(Position s_prev, const Theta& theta, const CovariateStack& stack, double delta_bar,
                            double dt, Rng& rng, double log_g_max) {
  if (!(delta_bar > 0.0) || !(dt > 0.0)) throw DataError("step_sample needs delta_bar > 0 and dt > 0");
  const double sigma = availability_sigma(delta_bar, dt);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<double> w(stack.p());
  StepDraw out;
  while (out.proposals < kMaxStepProposals) {
    ++out.proposals;
    const double zx = normal(rng);
    const double zy = normal(rng);
    const Position s{s_prev.x + sigma * zx, s_prev.y + sigma * zy};
    if (!stack.try_extract(s, w)) continue;
    const double log_ratio = EdeInverseLogit::log_g(linear_predictor(w, theta)) - log_g_max;
    if (std::log(unif(rng)) < log_ratio) {
      out.position = s;
      return out;
    }
  }
  throw RejectionExhausted("step sampler exhausted " + std::to_string(kMaxStepProposals) + " proposals");
}

inline StepDraw step_sample(Position s_prev, const Theta& theta, const CovariateStack& stack, double delta_bar,
                            double dt, Rng& rng) {
  return step_sample(s_prev, theta, stack, delta_bar, dt, rng, log_selection_max(stack, theta));
}

/// n_steps + 1 fixes at spacing dt starting at cfg.start at time 0.
inline Track simulate_track(const SimConfig& cfg, const CovariateStack& stack) {
  if (cfg.n_steps < 2) throw ConfigError("n_steps must be at least 2");
  if (!(cfg.dt > 0.0)) throw ConfigError("dt must be positive");
  if (static_cast<std::size_t>(cfg.theta_true.size()) != stack.p())
    throw ConfigError("theta_true length does not match the covariate stack");
  std::vector<double> w(stack.p());
  if (!stack.try_extract(cfg.start, w)) throw ConfigError("start position is outside the raster or on nodata");
  const auto& mode = cfg.delta_bar_mode;
  if (mode.kind == DeltaBarMode::Kind::Fixed && !(mode.value > 0.0))
    throw ConfigError("fixed delta_bar must be positive");

  const MotilityContext ctx{stack.header().cellsize, cfg.dt};
  const double radius = mode.radius > 0.0 ? mode.radius : 5.0 * ctx.cellsize;
  const double log_g_max = log_selection_max(stack, cfg.theta_true);
  Rng rng = substream(cfg.seed, kSimulationStream);

  std::vector<Fix> fixes;
  fixes.reserve(cfg.n_steps + 1);
  fixes.push_back({0.0, cfg.start.x, cfg.start.y});
  Position s = cfg.start;
  for (std::size_t k = 1; k <= cfg.n_steps; ++k) {
    const double delta_bar = mode.kind == DeltaBarMode::Kind::Fixed
                                 ? mode.value
                                 : local_harmonic_delta_bar(stack, cfg.theta_true, s, radius, ctx);
    s = step_sample(s, cfg.theta_true, stack, delta_bar, cfg.dt, rng, log_g_max).position;
    fixes.push_back({static_cast<double>(k) * cfg.dt, s.x, s.y});
  }
  return Track(std::move(fixes), "simulated");
}

/**
 * Synthetic covariate: sum of n_waves cosines with random orientation,
 * phase and wavelength in [min_wavelength, max_wavelength] (m), evaluated
 * at cell centres and standardized to mean 0, sd 1.
 */
inline Raster smooth_random_field(RasterHeader header, std::uint64_t seed, double min_wavelength,
                                  double max_wavelength, int n_waves = 8) {
  header.validate();
  Rng rng = substream(seed, 0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  struct Wave {
    double kx, ky, phase;
  };
  std::vector<Wave> waves;
  for (int k = 0; k < n_waves; ++k) {
    const double angle = 2.0 * M_PI * unif(rng);
    const double wavelength = min_wavelength + (max_wavelength - min_wavelength) * unif(rng);
    const double kmag = 2.0 * M_PI / wavelength;
    waves.push_back({kmag * std::cos(angle), kmag * std::sin(angle), 2.0 * M_PI * unif(rng)});
  }
  Raster r = Raster::filled(header, 0.0);
  for (int row = 0; row < header.nrows; ++row)
    for (int col = 0; col < header.ncols; ++col) {
      const Position c = header.cell_center(row, col);
      double v = 0.0;
      for (const auto& wv : waves) v += std::cos(wv.kx * c.x + wv.ky * c.y + wv.phase);
      r.set(row, col, v);
    }
  return standardize(r).raster;
}

}  // namespace mstpp
