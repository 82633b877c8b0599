#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "mstpp/derived.hpp"

using namespace mstpp;

namespace {

Chain make_chain(const std::vector<std::vector<double>>& rows) {
  Chain c;
  c.draws.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t k = 0; k < rows[r].size(); ++k)
      c.draws(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = rows[r][k];
  c.accept_rate = 0.75;
  return c;
}

CovariateStack two_by_two() {
  CovariateStack s;
  s.add_layer("v", Raster(RasterHeader{2, 2, 0, 0, 100, -9999}, {-1.0, 0.0, 2.0, -9999}));
  return s;
}

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

TEST(DerivedQuantity, ResidenceTimeAtZeroThetaIs24) {
  const std::vector<double> w{1.0, 3.7};
  Theta th = Theta::Zero(2);
  EXPECT_EQ(derived_quantity(Quantity::ResidenceTime, w, th, 100.0, 3.0), 24.0);
  EXPECT_EQ(derived_quantity(Quantity::MovementProbability, w, th, 100.0, 3.0), 0.5);
  EXPECT_NEAR(derived_quantity(Quantity::Motility, w, th, 100.0, 3.0), 10000.0 * 0.5 / 12.0, 1e-12);
}

TEST(DerivedQuantity, ResidenceTimesMotilityIsCellArea) {
  Rng rng(3);
  std::normal_distribution<double> n(0.0, 2.0);
  for (int k = 0; k < 200; ++k) {
    const std::vector<double> w{1.0, n(rng)};
    Theta th(2);
    th << n(rng), n(rng);
    const double r = derived_quantity(Quantity::ResidenceTime, w, th, 100.0, 3.0);
    const double d = derived_quantity(Quantity::Motility, w, th, 100.0, 3.0);
    EXPECT_NEAR(r * d, 10000.0, 1e-9);
  }
}

TEST(PosteriorMap, MeanAveragesOverDraws) {
  const auto stack = two_by_two();
  const auto chain = make_chain({{0.0, 1.0}, {0.5, -1.0}, {-0.3, 2.0}});
  MapRequest req{Quantity::MovementProbability, Statistic::Mean, 3.0, 1};
  const Raster m = posterior_map(chain, stack, req);
  for (auto [row, col, v] : {std::tuple{0, 0, -1.0}, {0, 1, 0.0}, {1, 0, 2.0}}) {
    const double expected = (logistic(0.0 + v) + logistic(0.5 - v) + logistic(-0.3 + 2.0 * v)) / 3.0;
    EXPECT_NEAR(m.value_at(row, col), expected, 1e-15);
  }
  // The mean of r over draws is not r at the posterior mean.
  req.quantity = Quantity::ResidenceTime;
  const Raster r = posterior_map(chain, stack, req);
  const double plug_in = 12.0 / logistic(0.2 / 3.0 + 2.0 * 2.0 / 3.0);
  EXPECT_GT(std::abs(r.value_at(1, 0) - plug_in), 1e-3);
}

TEST(PosteriorMap, NodataPropagates) {
  const auto stack = two_by_two();
  const Raster m = posterior_map(make_chain({{0.0, 1.0}}), stack, {});
  EXPECT_TRUE(m.is_nodata_at(1, 1));
  EXPECT_EQ(m.value_at(1, 1), -9999.0);
  EXPECT_EQ(m.value_at(0, 1), 24.0);
}

TEST(PosteriorMap, ThinningAndQuantiles) {
  CovariateStack stack;
  stack.add_layer("v", Raster::filled(RasterHeader{1, 1, 0, 0, 100, -9999}, 0.0));
  std::vector<std::vector<double>> rows;
  for (int k = 0; k < 40; ++k) rows.push_back({k % 4 == 0 ? 0.0 : 50.0, 0.0});
  const auto chain = make_chain(rows);
  // Every 4th draw is theta = 0 (r = 24); thinning by 4 keeps only those.
  EXPECT_EQ(posterior_map(chain, stack, {Quantity::ResidenceTime, Statistic::Mean, 3.0, 4}).value_at(0, 0), 24.0);
  const double all = posterior_map(chain, stack, {Quantity::ResidenceTime, Statistic::Mean, 3.0, 1}).value_at(0, 0);
  EXPECT_NEAR(all, (10 * 24.0 + 30 * 12.0) / 40.0, 1e-9);
  EXPECT_NEAR(posterior_map(chain, stack, {Quantity::ResidenceTime, Statistic::Q975, 3.0, 1}).value_at(0, 0), 24.0, 1e-9);
  EXPECT_NEAR(posterior_map(chain, stack, {Quantity::ResidenceTime, Statistic::Q025, 3.0, 1}).value_at(0, 0), 12.0, 1e-9);
}

TEST(PosteriorMap, Errors) {
  const auto stack = two_by_two();
  EXPECT_THROW(posterior_map(make_chain({{0.0, 1.0, 2.0}}), stack, {}), DataError);
  EXPECT_THROW(posterior_map(Chain{}, stack, {}), DataError);
  EXPECT_THROW(posterior_map(make_chain({{0.0, 1.0}}), stack, {Quantity::ResidenceTime, Statistic::Mean, 3.0, 0}),
               ConfigError);
  EXPECT_THROW(posterior_map(make_chain({{0.0, 1.0}}), stack, {Quantity::ResidenceTime, Statistic::Mean, 0.0, 1}),
               ConfigError);
}

TEST(Names, ParseAndPrint) {
  for (auto q : {Quantity::ResidenceTime, Quantity::MovementProbability, Quantity::Motility})
    EXPECT_EQ(parse_quantity(to_string(q)), q);
  for (auto s : {Statistic::Mean, Statistic::Q025, Statistic::Q975}) EXPECT_EQ(parse_statistic(to_string(s)), s);
  EXPECT_THROW(parse_quantity("speed"), ConfigError);
  EXPECT_THROW(parse_statistic("median"), ConfigError);
}

TEST(Report, CoefficientRowsAndText) {
  const auto chain = make_chain({{1.0, -2.0}, {2.0, -1.0}, {3.0, 0.5}, {4.0, -0.5}});
  const auto rows = coefficient_report(chain, {"(intercept)", "cover"});
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].mean, 2.5);
  EXPECT_EQ(rows[0].p_positive, 1.0);
  EXPECT_EQ(rows[1].p_positive, 0.25);
  EXPECT_THROW(coefficient_report(chain, {"a"}), DataError);
  std::ostringstream out;
  write_report_text(out, rows);
  const std::string text = out.str();
  EXPECT_EQ(text.substr(0, text.find('\n')).find("coefficient"), 0u);
  EXPECT_NE(text.find("(intercept)     2.5000"), std::string::npos) << text;
}

TEST(Report, SummaryJsonKeysInOrder) {
  const auto chain = make_chain({{1.0, -2.0}, {2.0, -1.0}, {3.0, 0.5}, {4.0, -0.5}});
  const auto j = summary_json(chain, {"(intercept)", "cover"});
  EXPECT_EQ(j["accept_rate"], 0.75);
  EXPECT_EQ(j["draws"], 4);
  const auto& c = j["coefficients"]["cover"];
  std::vector<std::string> keys;
  for (auto it = c.begin(); it != c.end(); ++it) keys.push_back(it.key());
  EXPECT_EQ(keys, (std::vector<std::string>{"mean", "sd", "q025", "q975", "ess", "accept_rate", "p_positive"}));
  EXPECT_EQ(c["mean"], -0.75);
  EXPECT_EQ(c["p_positive"], 0.25);
  EXPECT_EQ(j["coefficients"].begin().key(), "(intercept)");
}
