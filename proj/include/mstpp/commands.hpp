#pragma once

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mstpp/availability.hpp"
#include "mstpp/check.hpp"
#include "mstpp/config.hpp"
#include "mstpp/derived.hpp"
#include "mstpp/error.hpp"
#include "mstpp/hmc.hpp"
#include "mstpp/likelihood.hpp"
#include "mstpp/simulate.hpp"
#include "mstpp/telemetry.hpp"

namespace mstpp {

enum ExitCode : int { kExitOk = 0, kExitFail = 1, kExitConfig = 2, kExitData = 3, kExitSampler = 4 };

inline constexpr const char* kVersion = "0.1.0";

namespace detail {

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << text;
}

inline void write_json(const std::filesystem::path& path, const nlohmann::ordered_json& j) { write_text(path, j.dump(2) + "\n"); }

inline std::filesystem::path prepare_out(const RunConfig& c) {
  std::filesystem::path out(c.out);
  std::error_code ec;
  std::filesystem::create_directories(out, ec);
  if (ec) throw ConfigError("cannot create output directory '" + c.out + "': " + ec.message());
  return out;
}

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline nlohmann::ordered_json layer_json(const std::vector<LoadedLayer>& layers) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& l : layers)
    arr.push_back({{"name", l.name},
                   {"transform", l.standardized ? "standardize" : "raw"},
                   {"mean", l.mean},
                   {"sd", l.sd}});
  return arr;
}

/// Runs `body`, mapping library errors to exit codes and printing them.
template <class Fn>
int guarded(const char* command, std::ostream& err, Fn&& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    err << "mstpp " << command << ": config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const InitializationFailure& e) {
    err << "mstpp " << command << ": sampler error (InitializationFailure): " << e.what() << '\n';
    return kExitSampler;
  } catch (const NonFiniteTrajectory& e) {
    err << "mstpp " << command << ": sampler error (NonFiniteTrajectory): " << e.what() << '\n';
    return kExitSampler;
  } catch (const ParseError& e) {
    err << "mstpp " << command << ": data error (ParseError): " << e.what() << '\n';
    return kExitData;
  } catch (const RejectionExhausted& e) {
    err << "mstpp " << command << ": data error (RejectionExhausted): " << e.what() << '\n';
    return kExitData;
  } catch (const DataError& e) {
    err << "mstpp " << command << ": data error: " << e.what() << '\n';
    return kExitData;
  } catch (const Error& e) {
    err << "mstpp " << command << ": error: " << e.what() << '\n';
    return kExitData;
  }
}

}  // namespace detail

/**
 * Reads the track and layers, builds the augmented data, runs HMC and
 * writes chain.csv, summary.json, coefficients.txt, run.cfg and
 * manifest.json into the output directory.
 */
inline int cmd_fit(const RunConfig& cfg, std::ostream& log = std::cout, std::ostream& err = std::cerr) {
  return detail::guarded("fit", err, [&] {
    const auto t0 = std::chrono::steady_clock::now();
    validate_for_fit(cfg);
    const Prior prior = make_prior(cfg);
    const HmcConfig hmc = make_hmc_config(cfg, prior);
    const auto out = detail::prepare_out(cfg);

    const Track track = read_track(cfg.track);
    std::vector<LoadedLayer> layers;
    const CovariateStack stack = load_stack(cfg, &layers);
    const MotilitySeries motility = estimate_delta_bar(track, cfg.window_hours);
    const AugmentedDataset data = build_augmented(track, motility, stack, cfg.J, cfg.seed);
    if (!cfg.dump_augmented.empty()) write_augmented_csv(cfg.dump_augmented, data);
    const double prep_seconds = detail::seconds_since(t0);

    if (!scale_identifiable(cfg.family))
      err << "warning: non-identifiable scale: the " << family_tag(cfg.family)
          << " family is invariant to theta -> c theta; coefficient magnitudes are set by the prior\n";
    if (!cfg.mh_correction) err << "warning: Metropolis correction disabled; the chain is not exact\n";

    log << "fit: " << track.size() << " fixes, " << data.frames.size() << " steps, J = " << cfg.J
        << ", p = " << stack.p() << ", " << hmc.iterations << " iterations (" << hmc.leapfrog_steps()
        << " leapfrog steps each)\n";
    const LogPosterior target(data, cfg.family, prior);
    const auto t1 = std::chrono::steady_clock::now();
    const Chain chain = sample(target, hmc);
    const double sample_seconds = detail::seconds_since(t1);

    const auto names = stack.coefficient_names();
    write_chain_csv((out / "chain.csv").string(), chain);
    detail::write_json(out / "summary.json", summary_json(chain, names));
    std::ostringstream report;
    write_report_text(report, coefficient_report(chain, names));
    detail::write_text(out / "coefficients.txt", report.str());
    const std::string cfg_text = to_text(cfg);
    detail::write_text(out / "run.cfg", cfg_text);

    nlohmann::ordered_json manifest = {
        {"command", "fit"},
        {"version", kVersion},
        {"seed", cfg.seed},
        {"config_hash", config_hash(cfg_text)},
        {"config", "run.cfg"},
        {"rerun", "mstpp fit --config run.cfg --out <dir>"},
        {"selection_family", std::string(family_tag(cfg.family))},
        {"coefficients", names},
        {"layers", detail::layer_json(layers)},
        {"window_hours", cfg.window_hours},
        {"delta_bar", motility.delta_bar},
        {"delta_bar_n", motility.n_i},
        {"augmentation_proposals", [&] {
           std::size_t n = 0;
           for (const auto& f : data.frames) n += f.proposals;
           return n;
         }()},
        {"accept_rate", chain.accept_rate},
        {"divergences", chain.divergences},
        {"timing_seconds", {{"prepare", prep_seconds}, {"sample", sample_seconds}, {"total", detail::seconds_since(t0)}}}};
    detail::write_json(out / "manifest.json", manifest);

    log << report.str() << "accept rate " << chain.accept_rate << ", divergences " << chain.divergences << ", "
        << sample_seconds << " s\n";
    return kExitOk;
  });
}

/// Simulates a track and writes track.csv, truth.json, run.cfg and manifest.json.
inline int cmd_simulate(const RunConfig& cfg, std::ostream& log = std::cout, std::ostream& err = std::cerr) {
  return detail::guarded("simulate", err, [&] {
    const auto t0 = std::chrono::steady_clock::now();
    validate_for_simulate(cfg);
    const auto out = detail::prepare_out(cfg);
    std::vector<LoadedLayer> layers;
    const CovariateStack stack = load_stack(cfg, &layers);
    const SimConfig sim = make_sim_config(cfg);
    const Track track = simulate_track(sim, stack);
    write_track((out / "track.csv").string(), track);

    const auto names = stack.coefficient_names();
    nlohmann::ordered_json theta = nlohmann::ordered_json::object();
    for (std::size_t k = 0; k < names.size(); ++k) theta[names[k]] = cfg.theta_true[k];
    const double radius = cfg.delta_bar_radius > 0 ? cfg.delta_bar_radius : 5.0 * stack.header().cellsize;
    nlohmann::ordered_json truth = {{"theta_true", theta},
                            {"n_steps", cfg.n_steps},
                            {"dt", cfg.dt},
                            {"start", cfg.start},
                            {"delta_bar_mode", cfg.delta_bar_mode},
                            {"seed", cfg.seed}};
    if (cfg.delta_bar_mode == "fixed")
      truth["delta_bar_value"] = cfg.delta_bar_value;
    else
      truth["delta_bar_radius"] = radius;
    detail::write_json(out / "truth.json", truth);

    const std::string cfg_text = to_text(cfg);
    detail::write_text(out / "run.cfg", cfg_text);
    detail::write_json(out / "manifest.json", {{"command", "simulate"},
                                               {"version", kVersion},
                                               {"seed", cfg.seed},
                                               {"config_hash", config_hash(cfg_text)},
                                               {"config", "run.cfg"},
                                               {"rerun", "mstpp simulate --config run.cfg --out <dir>"},
                                               {"layers", detail::layer_json(layers)},
                                               {"timing_seconds", detail::seconds_since(t0)}});
    log << "simulate: " << cfg.n_steps << " steps written to " << (out / "track.csv").string() << '\n';
    return kExitOk;
  });
}

/// Writes <quantity>_<statistic>.asc for each requested pair.
inline int cmd_map(const RunConfig& cfg, std::ostream& log = std::cout, std::ostream& err = std::cerr) {
  return detail::guarded("map", err, [&] {
    validate_for_map(cfg);
    const auto out = detail::prepare_out(cfg);
    const CovariateStack stack = load_stack(cfg);
    const Chain chain = read_chain_csv(cfg.chain);
    for (const auto& q : cfg.quantities) {
      for (const auto& s : cfg.statistics) {
        const MapRequest req{parse_quantity(q), parse_statistic(s), cfg.dt, cfg.thin};
        const auto path = out / (q + "_" + s + ".asc");
        write_ascii_grid(path.string(), posterior_map(chain, stack, req));
        log << "map: wrote " << path.string() << '\n';
      }
    }
    return kExitOk;
  });
}

/// Runs the built-in oracle suite; exit 1 if any check fails.
inline int cmd_check(std::ostream& log = std::cout, double corrupt_gradient = 1.0) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto results = run_checks(20240601, corrupt_gradient);
  print_checks(log, results);
  std::size_t failed = 0;
  for (const auto& r : results) failed += !r.passed;
  log << (failed ? "FAILED " : "all passed ") << "(" << results.size() - failed << "/" << results.size() << ", "
      << detail::seconds_since(t0) << " s)\n";
  return failed ? kExitFail : kExitOk;
}

}  // namespace mstpp
