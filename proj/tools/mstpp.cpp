#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "mstpp/commands.hpp"

namespace {

struct Flags {
  std::string config;
  std::uint64_t seed = 0;
  std::string out;
  std::string family;
  std::size_t J = 0;
  double window = 0;
  std::size_t iters = 0;
  std::size_t burnin = 0;
  std::string dump_augmented;
  bool no_mh = false;
  std::string chain;
  std::string quantity;
  std::string statistic;
  std::size_t thin = 0;
  double dt = 0;
  double corrupt_gradient = 1.0;
};

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "run configuration file");
  cmd->add_option("--seed", f.seed, "random seed");
  cmd->add_option("--out", f.out, "output directory");
}

void add_fit(CLI::App* cmd, Flags& f) {
  cmd->add_option("--family", f.family, "selection family: ede, exp, linear, invlinear");
  cmd->add_option("--J", f.J, "positions per step (1 used + J-1 available)");
  cmd->add_option("--window", f.window, "motility moving-average window (hours)");
  cmd->add_option("--iters", f.iters, "HMC iterations");
  cmd->add_option("--burnin", f.burnin, "burn-in iterations");
  cmd->add_option("--dump-augmented", f.dump_augmented, "write the augmented data set as CSV");
  cmd->add_flag("--no-mh-correction", f.no_mh, "accept every trajectory (no Metropolis step)");
}

void add_map(CLI::App* cmd, Flags& f) {
  cmd->add_option("--chain", f.chain, "chain CSV from fit");
  cmd->add_option("--quantity", f.quantity, "residence_time, movement_probability, motility (comma list)");
  cmd->add_option("--statistic", f.statistic, "mean, q025, q975 (comma list)");
  cmd->add_option("--thin", f.thin, "use every n-th draw");
  cmd->add_option("--dt", f.dt, "time step in hours");
}

std::string abs_path(const std::string& p) { return std::filesystem::absolute(p).lexically_normal().string(); }

// Flags override config values, which override defaults.
mstpp::RunConfig resolve(const CLI::App* cmd, const Flags& f) {
  mstpp::RunConfig c = f.config.empty() ? mstpp::RunConfig{} : mstpp::load_config(f.config);
  if (f.config.empty()) c.out = abs_path(c.out);
  auto given = [&](const char* name) { return cmd->get_option_no_throw(name) && cmd->count(name) > 0; };
  if (given("--seed")) c.seed = f.seed;
  if (given("--out")) c.out = abs_path(f.out);
  if (given("--family")) c.family = mstpp::parse_family(f.family);
  if (given("--J")) c.J = f.J;
  if (given("--window")) c.window_hours = f.window;
  if (given("--iters")) c.iterations = f.iters;
  if (given("--burnin")) c.burn_in = f.burnin;
  if (given("--dump-augmented")) c.dump_augmented = abs_path(f.dump_augmented);
  if (given("--no-mh-correction")) c.mh_correction = false;
  if (given("--chain")) c.chain = abs_path(f.chain);
  if (given("--quantity")) c.quantities = mstpp::detail::split_list(f.quantity);
  if (given("--statistic")) c.statistics = mstpp::detail::split_list(f.statistic);
  if (given("--thin")) c.thin = f.thin;
  if (given("--dt")) c.dt = f.dt;
  return c;
}

template <class Cmd>
int run(const CLI::App* cmd, const Flags& f, const char* name, Cmd&& body) {
  mstpp::RunConfig cfg;
  try {
    cfg = resolve(cmd, f);
  } catch (const mstpp::ConfigError& e) {
    std::cerr << "mstpp " << name << ": config error: " << e.what() << '\n';
    return mstpp::kExitConfig;
  }
  return body(cfg);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Step-selection movement model: simulate, fit, map and self-check"};
  app.set_version_flag("--version", mstpp::kVersion);
  app.require_subcommand(1);
  Flags f;

  auto* fit = app.add_subcommand("fit", "fit selection coefficients by HMC");
  add_common(fit, f);
  add_fit(fit, f);

  auto* sim = app.add_subcommand("simulate", "simulate a telemetry track");
  add_common(sim, f);

  auto* map = app.add_subcommand("map", "posterior maps of derived quantities");
  add_common(map, f);
  add_map(map, f);

  auto* check = app.add_subcommand("check", "run the built-in oracle suite");
  check->add_option("--corrupt-gradient", f.corrupt_gradient, "scale analytic gradients (test hook)")
      ->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : mstpp::kExitConfig;
  }

  if (*fit) return run(fit, f, "fit", [](const mstpp::RunConfig& c) { return mstpp::cmd_fit(c); });
  if (*sim) return run(sim, f, "simulate", [](const mstpp::RunConfig& c) { return mstpp::cmd_simulate(c); });
  if (*map) return run(map, f, "map", [](const mstpp::RunConfig& c) { return mstpp::cmd_map(c); });
  return mstpp::cmd_check(std::cout, f.corrupt_gradient);
}
