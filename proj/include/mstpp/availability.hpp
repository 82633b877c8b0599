#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "mstpp/error.hpp"
#include "mstpp/geo_raster.hpp"
#include "mstpp/rng.hpp"
#include "mstpp/telemetry.hpp"

namespace mstpp {

/// Heap buffer aligned for Eigen's widest packet. Vectorized reductions peel
/// a different number of scalar head elements depending on the address, so
/// a fixed alignment keeps sums bit-identical from run to run.
using AlignedBuffer = std::vector<double, Eigen::aligned_allocator<double>>;

/**
 * Use-availability data for one step: slot 0 holds the observed position
 * (the single "used" slot), slots 1..J-1 the availability draws. Covariates
 * are stored column-major (J x p, one column per coefficient) so the
 * likelihood can sweep each coefficient over all slots.
 */
struct StepFrame {
  std::size_t step_index = 0;  // 1-based i in 2..n
  std::size_t J = 0;
  std::size_t p = 0;
  AlignedBuffer covariates;
  std::vector<Position> positions;
  double delta_bar = 0.0;
  double dt = 0.0;
  std::size_t proposals = 0;

  double at(std::size_t slot, std::size_t k) const { return covariates[k * J + slot]; }

  std::vector<double> w(std::size_t slot) const {
    std::vector<double> out(p);
    for (std::size_t k = 0; k < p; ++k) out[k] = at(slot, k);
    return out;
  }
};

struct AugmentedDataset {
  std::vector<StepFrame> frames;
  std::size_t J = 0;
  std::size_t p = 0;
  std::uint64_t seed = 0;
};

struct AvailabilitySample {
  std::vector<Position> positions;
  std::vector<double> covariates;  // count rows of length p
  std::size_t proposals = 0;
  std::size_t rejections = 0;
};

inline constexpr std::size_t kProposalsPerDraw = 1000;

/// Per-axis standard deviation of the availability kernel, sqrt(2 delta_bar dt).
inline double availability_sigma(double delta_bar, double dt) { return std::sqrt(2.0 * delta_bar * dt); }

/**
 * Draws `count` positions from N(s_prev, 2 delta_bar dt I) restricted to
 * valid cells of the stack. Proposals outside the extent or on nodata are
 * redrawn; more than kProposalsPerDraw * count proposals in total raises
 * RejectionExhausted.
 */
inline AvailabilitySample sample_availability(Position s_prev, double delta_bar, double dt, std::size_t count,
                                              const CovariateStack& stack, Rng& rng) {
  if (!(delta_bar > 0.0) || !(dt > 0.0)) throw DataError("availability needs delta_bar > 0 and dt > 0");
  const double sigma = availability_sigma(delta_bar, dt);
  const std::size_t p = stack.p();
  AvailabilitySample out;
  out.positions.reserve(count);
  out.covariates.resize(count * p);
  std::normal_distribution<double> normal;
  const std::size_t cap = kProposalsPerDraw * count;
  std::size_t got = 0;
  while (got < count) {
    if (out.proposals >= cap)
      throw RejectionExhausted("availability sampling exhausted " + std::to_string(cap) +
                               " proposals around (" + std::to_string(s_prev.x) + ", " + std::to_string(s_prev.y) +
                               "); the track may hug the raster edge or sigma is too large");
    ++out.proposals;
    const double zx = normal(rng);
    const double zy = normal(rng);
    const Position s{s_prev.x + sigma * zx, s_prev.y + sigma * zy};
    if (!stack.try_extract(s, std::span<double>(out.covariates.data() + got * p, p))) {
      ++out.rejections;
      continue;
    }
    out.positions.push_back(s);
    ++got;
  }
  return out;
}

/**
 * Builds one frame per step i = 2..n. Slot 0 is the covariate vector at the
 * observed s(t_i); the J-1 availability draws are centred on s(t_{i-1}) and
 * use the RNG substream (seed, i).
 */
inline AugmentedDataset build_augmented(const Track& track, const MotilitySeries& motility,
                                        const CovariateStack& stack, std::size_t J, std::uint64_t seed) {
  if (J < 2) throw DataError("J must be at least 2");
  const auto st = steps(track);
  if (motility.delta_bar.size() != st.size())
    throw DataError("motility series length does not match the track's step count");

  const std::size_t p = stack.p();
  std::vector<double> scratch(p);
  std::string bad;
  for (const auto& s : st) {
    if (!stack.try_extract(s.curr, scratch)) bad += (bad.empty() ? "" : ", ") + std::to_string(s.index);
  }
  if (!bad.empty())
    throw DataError("observed fixes outside the raster extent or on nodata cells: " + bad);

  AugmentedDataset data;
  data.J = J;
  data.p = p;
  data.seed = seed;
  data.frames.reserve(st.size());
  for (std::size_t k = 0; k < st.size(); ++k) {
    const auto& s = st[k];
    StepFrame f;
    f.step_index = s.index;
    f.J = J;
    f.p = p;
    f.delta_bar = motility.delta_bar[k];
    f.dt = s.dt;
    f.covariates.resize(J * p);
    f.positions.reserve(J);
    stack.extract_into(s.curr, scratch);
    for (std::size_t c = 0; c < p; ++c) f.covariates[c * J] = scratch[c];
    f.positions.push_back(s.curr);

    Rng rng = substream(seed, s.index);
    auto avail = sample_availability(s.prev, f.delta_bar, f.dt, J - 1, stack, rng);
    for (std::size_t j = 1; j < J; ++j)
      for (std::size_t c = 0; c < p; ++c) f.covariates[c * J + j] = avail.covariates[(j - 1) * p + c];
    f.positions.insert(f.positions.end(), avail.positions.begin(), avail.positions.end());
    f.proposals = avail.proposals;
    data.frames.push_back(std::move(f));
  }
  return data;
}

/// Audit dump: step,slot,x,y,used,w_1..w_p (step and slot 1-based).
inline void write_augmented_csv(std::ostream& out, const AugmentedDataset& data) {
  out << "step,slot,x,y,used";
  for (std::size_t k = 1; k <= data.p; ++k) out << ",w_" << k;
  out << '\n';
  char buf[64];
  for (const auto& f : data.frames) {
    for (std::size_t j = 0; j < f.J; ++j) {
      std::snprintf(buf, sizeof buf, "%.17g,%.17g", f.positions[j].x, f.positions[j].y);
      out << f.step_index << ',' << j + 1 << ',' << buf << ',' << (j == 0 ? 1 : 0);
      for (double v : f.w(j)) {
        std::snprintf(buf, sizeof buf, ",%.17g", v);
        out << buf;
      }
      out << '\n';
    }
  }
}

inline void write_augmented_csv(const std::string& path, const AugmentedDataset& data) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  write_augmented_csv(out, data);
}

}  // namespace mstpp
