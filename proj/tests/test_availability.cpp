#include <cmath>
#include <random>
#include <sstream>

#include <boost/math/distributions/normal.hpp>
#include <gtest/gtest.h>

#include "mstpp/availability.hpp"
#include "mstpp/likelihood.hpp"

using namespace mstpp;

namespace {

// Three huge cells: any realistic sigma around the centre never leaves the grid.
CovariateStack unbounded_stack() {
  CovariateStack s;
  s.add_layer("v", Raster(RasterHeader{3, 3, -1.5e6, -1.5e6, 1e6, -9999}, {1, 2, 3, 4, 5, 6, 7, 8, 9}));
  return s;
}

CovariateStack gradient_stack(int n = 50, double cellsize = 20.0) {
  RasterHeader h{n, n, 0, 0, cellsize, -9999};
  std::vector<double> v(static_cast<std::size_t>(n * n));
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) v[static_cast<std::size_t>(r * n + c)] = 0.1 * c - 0.05 * r;
  CovariateStack s;
  s.add_layer("ramp", Raster(h, v));
  return s;
}

Track small_track() {
  return Track({{0, 500, 500}, {3, 520, 480}, {6, 560, 470}, {9, 540, 430}, {12, 500, 450}});
}

}  // namespace

TEST(Availability, SigmaFromDeltaBar) {
  EXPECT_NEAR(availability_sigma(625.0, 1.0), 35.35533905932738, 1e-12);
  EXPECT_EQ(availability_sigma(5000.0, 3.0), std::sqrt(30000.0));
}

TEST(Availability, MomentsOnUnboundedRaster) {
  const auto stack = unbounded_stack();
  Rng rng = substream(42, 1);
  const Position s0{1234.5, -678.9};
  const double delta_bar = 625.0, dt = 1.0;
  const std::size_t n = 100000;
  const auto out = sample_availability(s0, delta_bar, dt, n, stack, rng);
  ASSERT_EQ(out.positions.size(), n);
  EXPECT_EQ(out.rejections, 0u);
  EXPECT_EQ(out.proposals, n);

  double mx = 0, my = 0;
  for (const auto& p : out.positions) mx += p.x, my += p.y;
  mx /= n;
  my /= n;
  double sxx = 0, syy = 0, sxy = 0;
  for (const auto& p : out.positions) {
    sxx += (p.x - mx) * (p.x - mx);
    syy += (p.y - my) * (p.y - my);
    sxy += (p.x - mx) * (p.y - my);
  }
  sxx /= n - 1;
  syy /= n - 1;
  sxy /= n - 1;
  const double var = 2.0 * delta_bar * dt;
  const double sigma = std::sqrt(var);
  EXPECT_LT(std::abs(mx - s0.x), 4.0 * sigma / std::sqrt(double(n)));
  EXPECT_LT(std::abs(my - s0.y), 4.0 * sigma / std::sqrt(double(n)));
  EXPECT_NEAR(sxx, var, 0.05 * var);
  EXPECT_NEAR(syy, var, 0.05 * var);
  EXPECT_LT(std::abs(sxy), 0.05 * var);
}

TEST(Availability, TruncationMatchesHalfNormal) {
  // Left half of the grid is nodata; s_prev sits on the boundary, so valid
  // x offsets follow a half-normal with scale sigma.
  RasterHeader h{200, 200, -2000.0, -2000.0, 20.0, -9999};
  Raster r = Raster::filled(h, 1.0);
  for (int row = 0; row < 200; ++row)
    for (int col = 0; col < 100; ++col) r.set(row, col, h.nodata);
  CovariateStack stack;
  stack.add_layer("half", r);

  const double delta_bar = 200.0, dt = 2.0, sigma = availability_sigma(delta_bar, dt);
  Rng rng = substream(7, 3);
  const std::size_t n = 20000;
  const auto out = sample_availability({0.0, 0.0}, delta_bar, dt, n, stack, rng);
  EXPECT_NEAR(static_cast<double>(out.rejections) / out.proposals, 0.5, 0.02);

  std::vector<double> x;
  for (const auto& p : out.positions) {
    ASSERT_GE(p.x, 0.0);
    x.push_back(p.x);
  }
  std::sort(x.begin(), x.end());
  boost::math::normal_distribution<double> nd(0.0, sigma);
  double d = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double F = 2.0 * boost::math::cdf(nd, x[k]) - 1.0;
    d = std::max({d, std::abs(F - double(k) / n), std::abs(F - double(k + 1) / n)});
  }
  // Kolmogorov critical value at alpha = 0.01.
  EXPECT_LT(d, 1.628 / std::sqrt(double(n)));
}

TEST(Availability, ExhaustionIsReported) {
  CovariateStack tiny;
  tiny.add_layer("v", Raster::filled(RasterHeader{1, 1, 0, 0, 1.0, -9999}, 1.0));
  Rng rng(1);
  try {
    sample_availability({0.5, 0.5}, 1e8, 3.0, 5, tiny, rng);
    FAIL();
  } catch (const RejectionExhausted&) {
  }
  EXPECT_THROW(sample_availability({0.5, 0.5}, 0.0, 3.0, 5, tiny, rng), DataError);
  EXPECT_THROW(sample_availability({0.5, 0.5}, 1.0, -1.0, 5, tiny, rng), DataError);
}

TEST(BuildAugmented, LayoutAndCentring) {
  const auto stack = gradient_stack();
  const Track t = small_track();
  const auto mot = estimate_delta_bar(t, 70.0);
  const auto data = build_augmented(t, mot, stack, 11, 99);
  ASSERT_EQ(data.frames.size(), 4u);
  EXPECT_EQ(data.J, 11u);
  EXPECT_EQ(data.p, 2u);
  for (std::size_t k = 0; k < data.frames.size(); ++k) {
    const auto& f = data.frames[k];
    EXPECT_EQ(f.step_index, k + 2);
    ASSERT_EQ(f.positions.size(), 11u);
    ASSERT_EQ(f.covariates.size(), 22u);
    EXPECT_EQ(f.positions[0], t[k + 1].position());
    EXPECT_EQ(f.delta_bar, mot.delta_bar[k]);
    EXPECT_EQ(f.dt, 3.0);
    for (std::size_t j = 0; j < f.J; ++j) {
      const auto w = stack.extract(f.positions[j]);
      EXPECT_EQ(f.at(j, 0), 1.0);
      EXPECT_EQ(f.at(j, 1), w[1]);
    }
  }
}

TEST(BuildAugmented, DrawsCentredOnPreviousFix) {
  // Tiny delta_bar keeps every draw close to its centre.
  const auto stack = gradient_stack(100, 10.0);
  const Track t({{0, 200, 200}, {1, 600, 200}, {2, 600, 600}});
  MotilitySeries mot{{0.01, 0.01}, {1, 1}, 70.0};
  const auto data = build_augmented(t, mot, stack, 50, 5);
  for (std::size_t k = 0; k < 2; ++k) {
    const Position prev = t[k].position();
    for (std::size_t j = 1; j < 50; ++j) {
      EXPECT_LT(std::hypot(data.frames[k].positions[j].x - prev.x, data.frames[k].positions[j].y - prev.y), 2.0);
    }
  }
}

TEST(BuildAugmented, OneFramePerStepWithJSlots) {
  std::vector<Fix> f;
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 30.0);
  f.push_back({0, 500, 500});
  for (int k = 1; k < 150; ++k)
    f.push_back({3.0 * k, std::clamp(f.back().x + n(rng), 50.0, 950.0), std::clamp(f.back().y + n(rng), 50.0, 950.0)});
  const Track t(f);
  const auto data = build_augmented(t, estimate_delta_bar(t, 70.0), gradient_stack(), 101, 1);
  EXPECT_EQ(data.frames.size(), 149u);
  for (const auto& fr : data.frames) EXPECT_EQ(fr.positions.size(), 101u);
}

TEST(BuildAugmented, SameSeedIsBitIdentical) {
  const auto stack = gradient_stack();
  const Track t = small_track();
  const auto mot = estimate_delta_bar(t, 70.0);
  const auto a = build_augmented(t, mot, stack, 21, 1234);
  const auto b = build_augmented(t, mot, stack, 21, 1234);
  const auto c = build_augmented(t, mot, stack, 21, 1235);
  std::ostringstream sa, sb, sc;
  write_augmented_csv(sa, a);
  write_augmented_csv(sb, b);
  write_augmented_csv(sc, c);
  EXPECT_EQ(sa.str(), sb.str());
  EXPECT_NE(sa.str(), sc.str());
}

TEST(BuildAugmented, ConstantRasterGivesOneOverJ) {
  CovariateStack stack;
  stack.add_layer("flat", Raster::filled(RasterHeader{50, 50, 0, 0, 20, -9999}, 3.0));
  const Track t = small_track();
  const auto data = build_augmented(t, estimate_delta_bar(t, 70.0), stack, 25, 8);
  for (const auto& f : data.frames)
    for (std::size_t j = 0; j < f.J; ++j) EXPECT_EQ(f.w(j), f.w(0));
  Theta th(2);
  th << 0.3, -1.7;
  EXPECT_NEAR(cond_log_lik(data, Family::EdeInverseLogit, th), 4.0 * std::log(1.0 / 25.0), 1e-12);
}

TEST(BuildAugmented, OffGridFixesListedByIndex) {
  const auto stack = gradient_stack();  // extent [0, 1000)^2
  const Track t({{0, 500, 500}, {3, 1500, 500}, {6, 500, 500}, {9, 500, -10}});
  try {
    build_augmented(t, estimate_delta_bar(t, 70.0), stack, 5, 1);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("2, 4"), std::string::npos) << e.what();
  }
  const Track ok = small_track();
  EXPECT_THROW(build_augmented(ok, estimate_delta_bar(ok, 70.0), stack, 1, 1), DataError);
}

TEST(BuildAugmented, DumpHasHeaderAndOneUsedSlotPerStep) {
  const auto stack = gradient_stack();
  const Track t = small_track();
  const auto data = build_augmented(t, estimate_delta_bar(t, 70.0), stack, 4, 2);
  std::ostringstream out;
  write_augmented_csv(out, data);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "step,slot,x,y,used,w_1,w_2");
  int rows = 0, used = 0;
  while (std::getline(in, line)) {
    ++rows;
    auto cells = detail::split_csv(line);
    ASSERT_EQ(cells.size(), 7u);
    used += cells[4] == "1";
    if (cells[4] == "1") {
      EXPECT_EQ(cells[1], "1");
    }
  }
  EXPECT_EQ(rows, 16);
  EXPECT_EQ(used, 4);
}
