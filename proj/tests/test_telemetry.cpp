#include <cmath>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "mstpp/telemetry.hpp"

using namespace mstpp;

namespace {

Track parse(const std::string& text) {
  std::istringstream in(text);
  return read_track(in, "track.csv");
}

// Moving-average motility, one step at a time with no shared state.
std::vector<double> naive_delta_bar(const std::vector<Fix>& f, double window) {
  std::vector<double> out;
  for (std::size_t i = 1; i < f.size(); ++i) {
    double sum = 0.0;
    int n = 0;
    for (std::size_t j = 1; j < f.size(); ++j) {
      if (std::abs(f[j].t - f[i].t) > window / 2.0) continue;
      const double dx = f[j].x - f[j - 1].x, dy = f[j].y - f[j - 1].y;
      sum += (dx * dx + dy * dy) / (4.0 * (f[j].t - f[j - 1].t));
      ++n;
    }
    out.push_back(std::max(sum / n, 1e-6));
  }
  return out;
}

std::vector<Fix> random_walk(std::mt19937_64& rng, std::size_t n, bool irregular) {
  std::normal_distribution<double> step(0.0, 250.0);
  std::uniform_real_distribution<double> gap(0.5, 6.0);
  std::vector<Fix> f{{0.0, 1000.0, 2000.0}};
  for (std::size_t k = 1; k < n; ++k)
    f.push_back({f.back().t + (irregular ? gap(rng) : 3.0), f.back().x + step(rng), f.back().y + step(rng)});
  return f;
}

}  // namespace

TEST(ReadTrack, ThreeRows) {
  const Track t = parse("t,x,y\n0,0,0\n3,10,0\n7.5,10,20\n");
  ASSERT_EQ(t.size(), 3u);
  const auto st = steps(t);
  ASSERT_EQ(st.size(), 2u);
  EXPECT_EQ(st[0].index, 2u);
  EXPECT_EQ(st[0].dt, 3.0);
  EXPECT_EQ(st[1].index, 3u);
  EXPECT_EQ(st[1].dt, 4.5);
}

TEST(ReadTrack, RejectsBadInput) {
  EXPECT_THROW(parse("t,x,y\n0,0,0\n3,1,1\n3,2,2\n"), ParseError);   // duplicate t
  EXPECT_THROW(parse("t,x,y\n0,0,0\n6,1,1\n3,2,2\n"), ParseError);   // out of order
  EXPECT_THROW(parse("t,x,y\n0,0,0\n3,1,1\n"), DataError);           // fewer than 3 fixes
  EXPECT_THROW(parse("t,x,y\n0,0,0\n3,a,1\n6,2,2\n"), ParseError);   // non-numeric
  EXPECT_THROW(parse("time,x,y\n0,0,0\n3,1,1\n6,2,2\n"), ParseError);
  EXPECT_THROW(parse("t,x,y\n0,0\n3,1,1\n6,2,2\n"), ParseError);
}

TEST(ReadTrack, DuplicateTimestampNamesLine) {
  try {
    parse("t,x,y\n0,0,0\n3,1,1\n3,2,2\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 4u);
  }
}

TEST(ReadTrack, IsoTimestampsBecomeHours) {
  const Track t = parse("t,x,y\n2020-03-01T00:00:00Z,0,0\n2020-03-01T03:00:00Z,1,1\n2020-03-01 07:30,2,2\n");
  EXPECT_DOUBLE_EQ(t[1].t - t[0].t, 3.0);
  EXPECT_DOUBLE_EQ(t[2].t - t[1].t, 4.5);
  // 2020-03-01 crosses a leap day from February.
  const Track u = parse("t,x,y\n2020-02-28T12:00Z,0,0\n2020-03-01T12:00Z,1,1\n2020-03-02T12:00Z,2,2\n");
  EXPECT_DOUBLE_EQ(u[1].t - u[0].t, 48.0);
}

TEST(ReadTrack, OneHundredFiftyFixesThreeHoursApart) {
  std::ostringstream csv;
  csv << "t,x,y\n";
  for (int k = 0; k < 150; ++k) csv << 3 * k << ',' << k << ',' << -k << '\n';
  const Track t = parse(csv.str());
  EXPECT_EQ(t.size(), 150u);
  const auto st = steps(t);
  EXPECT_EQ(st.size(), 149u);
  for (const auto& s : st) EXPECT_EQ(s.dt, 3.0);
}

TEST(ReadTrack, WriteReadRoundTripIsExact) {
  std::mt19937_64 rng(4);
  const Track t(random_walk(rng, 40, true));
  std::ostringstream out;
  write_track(out, t);
  const Track back = parse(out.str());
  ASSERT_EQ(back.size(), t.size());
  for (std::size_t k = 0; k < t.size(); ++k) {
    EXPECT_EQ(back[k].t, t[k].t);
    EXPECT_EQ(back[k].x, t[k].x);
    EXPECT_EQ(back[k].y, t[k].y);
  }
}

TEST(Track, ValidatesConstruction) {
  EXPECT_THROW(Track({{0, 0, 0}, {1, 0, 0}}), DataError);
  EXPECT_THROW(Track({{0, 0, 0}, {1, NAN, 0}, {2, 0, 0}}), DataError);
  EXPECT_THROW(Track({{0, 0, 0}, {1, 0, 0}, {1, 0, 0}}), DataError);
}

TEST(Steps, UnitSquarePath) {
  const Track t({{0, 0, 0}, {1, 1, 0}, {2, 1, 1}});
  const auto st = steps(t);
  ASSERT_EQ(st.size(), 2u);
  EXPECT_EQ(st[0].prev, (Position{0, 0}));
  EXPECT_EQ(st[0].curr, (Position{1, 0}));
  EXPECT_EQ(st[1].prev, (Position{1, 0}));
  EXPECT_EQ(st[1].curr, (Position{1, 1}));
}

TEST(DeltaBar, ConstantDisplacement) {
  std::vector<Fix> f;
  for (int k = 0; k < 30; ++k) f.push_back({3.0 * k, 60.0 * k, 80.0 * k});  // |step| = 100 m
  for (double window : {1.0, 10.0, 70.0, 1e6}) {
    const auto m = estimate_delta_bar(Track(f), window);
    for (double d : m.delta_bar) EXPECT_NEAR(d, 10000.0 / 12.0, 1e-10 * 10000.0 / 12.0);
  }
}

TEST(DeltaBar, SingleQualifyingStep) {
  // Steps end at t = 1, 11, 21: a 2 h window holds one step each.
  const Track t({{0, 0, 0}, {1, 30, 40}, {11, 30, 40 + 1}, {21, 30, 40 + 3}});
  const auto m = estimate_delta_bar(t, 2.0);
  EXPECT_DOUBLE_EQ(m.delta_bar[0], 625.0);
  EXPECT_EQ(m.n_i[0], 1u);
}

TEST(DeltaBar, MatchesNaiveOracle) {
  std::mt19937_64 rng(50);
  for (bool irregular : {false, true}) {
    const auto f = random_walk(rng, 51, irregular);
    const auto m = estimate_delta_bar(Track(f), 70.0);
    const auto ref = naive_delta_bar(f, 70.0);
    ASSERT_EQ(m.delta_bar.size(), 50u);
    for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(m.delta_bar[i], ref[i], 1e-10 * ref[i]);
  }
}

TEST(DeltaBar, WindowBoundaryIsInclusive) {
  // Step ends at 3, 6, 9; window 6 h includes steps exactly 3 h away.
  const Track t({{0, 0, 0}, {3, 10, 0}, {6, 30, 0}, {9, 60, 0}});
  const auto m = estimate_delta_bar(t, 6.0);
  EXPECT_EQ(m.n_i, (std::vector<std::size_t>{2, 3, 2}));
}

TEST(DeltaBar, StationaryAnimalIsFloored) {
  const Track t({{0, 5, 5}, {3, 5, 5}, {6, 5, 5}, {9, 5, 5}});
  for (double d : estimate_delta_bar(t, 70.0).delta_bar) EXPECT_EQ(d, kDeltaFloor);
}

TEST(DeltaBar, RigidMotionAndScaling) {
  std::mt19937_64 rng(8);
  const auto f = random_walk(rng, 60, true);
  const auto base = estimate_delta_bar(Track(f), 20.0).delta_bar;

  const double a = 0.7, c = 3.0;
  std::vector<Fix> moved = f, scaled = f;
  for (std::size_t k = 0; k < f.size(); ++k) {
    moved[k].x = std::cos(a) * f[k].x - std::sin(a) * f[k].y + 5e5;
    moved[k].y = std::sin(a) * f[k].x + std::cos(a) * f[k].y - 3e4;
    scaled[k].x = c * f[k].x;
    scaled[k].y = c * f[k].y;
  }
  const auto rot = estimate_delta_bar(Track(moved), 20.0).delta_bar;
  const auto sc = estimate_delta_bar(Track(scaled), 20.0).delta_bar;
  for (std::size_t i = 0; i < base.size(); ++i) {
    EXPECT_NEAR(rot[i], base[i], 1e-8 * base[i]);
    EXPECT_NEAR(sc[i], c * c * base[i], 1e-10 * c * c * base[i]);
  }
}

TEST(DeltaBar, WholeTrackWindowIsConstant) {
  std::mt19937_64 rng(2);
  const auto f = random_walk(rng, 30, true);
  const auto m = estimate_delta_bar(Track(f), 2.0 * (f.back().t - f.front().t) + 1.0);
  for (double d : m.delta_bar) EXPECT_DOUBLE_EQ(d, m.delta_bar.front());
  for (auto n : m.n_i) EXPECT_EQ(n, 29u);
}

TEST(DeltaBar, RejectsNonPositiveWindow) {
  const Track t({{0, 0, 0}, {1, 1, 0}, {2, 1, 1}});
  EXPECT_THROW(estimate_delta_bar(t, 0.0), DataError);
}
