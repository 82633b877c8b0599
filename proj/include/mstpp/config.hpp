#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mstpp/derived.hpp"
#include "mstpp/error.hpp"
#include "mstpp/geo_raster.hpp"
#include "mstpp/hmc.hpp"
#include "mstpp/likelihood.hpp"
#include "mstpp/selection.hpp"
#include "mstpp/simulate.hpp"
#include "mstpp/telemetry.hpp"

namespace mstpp {

struct LayerSpec {
  std::string name;
  std::string path;
  bool standardize = true;  // false: pass values through ("raw")
};

/**
 * Everything a run needs. Parsed from flat `key = value` text with
 * repeatable `[layer]` sections; command-line flags are applied on top.
 * Relative paths resolve against the config file's directory.
 */
struct RunConfig {
  std::string track;
  std::string out = "out";
  std::vector<LayerSpec> layers;
  bool intercept = true;
  Family family = Family::EdeInverseLogit;
  std::size_t J = 101;
  double window_hours = 70.0;
  std::uint64_t seed = 1;
  std::string dump_augmented;

  std::vector<double> prior_mu;   // empty: zeros
  std::vector<double> prior_var;  // empty: 0.1 for the intercept, 1 otherwise

  double step_size = 0.05;
  double trajectory_time = 10.0;
  std::size_t iterations = 20000;
  std::size_t burn_in = 1000;
  std::vector<double> mass{3.0};  // one value: multiple of I; p values: diagonal
  std::vector<double> theta_init; // empty: prior mean
  bool mh_correction = true;

  // simulate
  std::vector<double> theta_true;
  std::size_t n_steps = 0;
  double dt = 3.0;
  std::vector<double> start;
  std::string delta_bar_mode = "harmonic_local";
  double delta_bar_radius = 0.0;
  double delta_bar_value = 0.0;

  // map
  std::string chain;
  std::vector<std::string> quantities{"residence_time", "movement_probability"};
  std::vector<std::string> statistics{"mean"};
  std::size_t thin = 10;

  std::size_t p() const { return layers.size() + (intercept ? 1 : 0); }
};

namespace detail {

inline std::vector<std::string> split_list(const std::string& v) {
  std::string s = v;
  for (char& c : s)
    if (c == ',') c = ' ';
  std::istringstream ls(s);
  std::vector<std::string> out;
  std::string tok;
  while (ls >> tok) out.push_back(tok);
  return out;
}

inline double to_double(const std::string& key, const std::string& v) {
  auto n = parse_number(trim(v));
  if (!n) throw ConfigError("config key '" + key + "': expected a number, got '" + v + "'");
  return *n;
}

inline std::size_t to_count(const std::string& key, const std::string& v) {
  const double d = to_double(key, v);
  if (d < 0 || d != std::floor(d)) throw ConfigError("config key '" + key + "': expected a non-negative integer");
  return static_cast<std::size_t>(d);
}

inline std::uint64_t to_seed(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const auto s = trim(v);
    const auto x = std::stoull(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected an unsigned 64-bit integer");
  }
}

inline bool to_bool(const std::string& key, const std::string& v) {
  const auto s = lower(trim(v));
  if (s == "true" || s == "yes" || s == "1" || s == "on") return true;
  if (s == "false" || s == "no" || s == "0" || s == "off") return false;
  throw ConfigError("config key '" + key + "': expected true or false");
}

inline std::vector<double> to_doubles(const std::string& key, const std::string& v) {
  std::vector<double> out;
  for (const auto& t : split_list(v)) out.push_back(to_double(key, t));
  return out;
}

inline std::string resolve_path(const std::filesystem::path& base, const std::string& p) {
  if (p.empty()) return p;
  std::filesystem::path path(p);
  if (path.is_relative() && !base.empty()) path = base / path;
  return std::filesystem::absolute(path).lexically_normal().string();
}

/// Shortest text that parses back to the same double.
inline std::string shortest(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::string join(const std::vector<double>& v) {
  std::string out;
  for (std::size_t k = 0; k < v.size(); ++k) out += (k ? " " : "") + shortest(v[k]);
  return out;
}

inline std::string join(const std::vector<std::string>& v) {
  std::string out;
  for (std::size_t k = 0; k < v.size(); ++k) out += (k ? "," : "") + v[k];
  return out;
}

}  // namespace detail

inline void apply_config_key(RunConfig& c, const std::string& key, const std::string& value,
                             const std::filesystem::path& base) {
  using namespace detail;
  const std::string v = trim(value);
  if (key == "track") c.track = resolve_path(base, v);
  else if (key == "out") c.out = resolve_path(base, v);
  else if (key == "intercept") c.intercept = to_bool(key, v);
  else if (key == "selection_family") c.family = parse_family(v);
  else if (key == "J") c.J = to_count(key, v);
  else if (key == "window_hours") c.window_hours = to_double(key, v);
  else if (key == "seed") c.seed = to_seed(key, v);
  else if (key == "dump_augmented") c.dump_augmented = resolve_path(base, v);
  else if (key == "prior_mu") c.prior_mu = to_doubles(key, v);
  else if (key == "prior_var") c.prior_var = to_doubles(key, v);
  else if (key == "step_size") c.step_size = to_double(key, v);
  else if (key == "trajectory_time") c.trajectory_time = to_double(key, v);
  else if (key == "iterations") c.iterations = to_count(key, v);
  else if (key == "burn_in") c.burn_in = to_count(key, v);
  else if (key == "mass") c.mass = to_doubles(key, v);
  else if (key == "theta_init") c.theta_init = to_doubles(key, v);
  else if (key == "mh_correction") c.mh_correction = to_bool(key, v);
  else if (key == "theta_true") c.theta_true = to_doubles(key, v);
  else if (key == "n_steps") c.n_steps = to_count(key, v);
  else if (key == "dt") c.dt = to_double(key, v);
  else if (key == "start") c.start = to_doubles(key, v);
  else if (key == "delta_bar_mode") c.delta_bar_mode = v;
  else if (key == "delta_bar_radius") c.delta_bar_radius = to_double(key, v);
  else if (key == "delta_bar_value") c.delta_bar_value = to_double(key, v);
  else if (key == "chain") c.chain = resolve_path(base, v);
  else if (key == "quantity") c.quantities = split_list(v);
  else if (key == "statistic") c.statistics = split_list(v);
  else if (key == "thin") c.thin = to_count(key, v);
  else throw ConfigError("unknown config key '" + key + "'");
}

inline RunConfig parse_config(std::istream& in, const std::filesystem::path& base = {},
                              const std::string& source = "<config>") {
  RunConfig c;
  c.out = detail::resolve_path(base, c.out);
  std::string line;
  std::size_t lineno = 0;
  LayerSpec* layer = nullptr;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line != "[layer]") throw ConfigError(source + ":" + std::to_string(lineno) + ": unknown section " + line);
      c.layers.emplace_back();
      layer = &c.layers.back();
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(source + ":" + std::to_string(lineno) + ": expected key = value");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    try {
      if (layer) {
        if (key == "name") layer->name = value;
        else if (key == "path") layer->path = detail::resolve_path(base, value);
        else if (key == "transform") {
          if (value != "standardize" && value != "raw")
            throw ConfigError("layer transform must be 'standardize' or 'raw'");
          layer->standardize = value == "standardize";
        } else {
          throw ConfigError("unknown layer key '" + key + "'");
        }
      } else {
        apply_config_key(c, key, value, base);
      }
    } catch (const ConfigError& e) {
      throw ConfigError(source + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  return parse_config(in, std::filesystem::path(path).parent_path(), path);
}

/// Canonical text form; parses back to the same config.
inline std::string to_text(const RunConfig& c) {
  using detail::join;
  std::ostringstream o;
  const auto num = detail::shortest;
  o << "track = " << c.track << '\n'
    << "out = " << c.out << '\n'
    << "intercept = " << (c.intercept ? "true" : "false") << '\n'
    << "selection_family = " << family_tag(c.family) << '\n'
    << "J = " << c.J << '\n'
    << "window_hours = " << num(c.window_hours) << '\n'
    << "seed = " << c.seed << '\n';
  if (!c.dump_augmented.empty()) o << "dump_augmented = " << c.dump_augmented << '\n';
  if (!c.prior_mu.empty()) o << "prior_mu = " << join(c.prior_mu) << '\n';
  if (!c.prior_var.empty()) o << "prior_var = " << join(c.prior_var) << '\n';
  o << "step_size = " << num(c.step_size) << '\n'
    << "trajectory_time = " << num(c.trajectory_time) << '\n'
    << "iterations = " << c.iterations << '\n'
    << "burn_in = " << c.burn_in << '\n'
    << "mass = " << join(c.mass) << '\n';
  if (!c.theta_init.empty()) o << "theta_init = " << join(c.theta_init) << '\n';
  o << "mh_correction = " << (c.mh_correction ? "true" : "false") << '\n';
  if (!c.theta_true.empty()) o << "theta_true = " << join(c.theta_true) << '\n';
  if (c.n_steps) o << "n_steps = " << c.n_steps << '\n';
  o << "dt = " << num(c.dt) << '\n';
  if (!c.start.empty()) o << "start = " << join(c.start) << '\n';
  o << "delta_bar_mode = " << c.delta_bar_mode << '\n';
  if (c.delta_bar_radius > 0) o << "delta_bar_radius = " << num(c.delta_bar_radius) << '\n';
  if (c.delta_bar_value > 0) o << "delta_bar_value = " << num(c.delta_bar_value) << '\n';
  if (!c.chain.empty()) o << "chain = " << c.chain << '\n';
  o << "quantity = " << join(c.quantities) << '\n'
    << "statistic = " << join(c.statistics) << '\n'
    << "thin = " << c.thin << '\n';
  for (const auto& l : c.layers)
    o << "\n[layer]\nname = " << l.name << "\npath = " << l.path
      << "\ntransform = " << (l.standardize ? "standardize" : "raw") << '\n';
  return o.str();
}

/// 64-bit FNV-1a, printed as 16 hex digits.
inline std::string config_hash(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline void require_file(const std::string& key, const std::string& path) {
  if (path.empty()) throw ConfigError("missing required key '" + key + "'");
  if (!std::filesystem::is_regular_file(path))
    throw ConfigError("config key '" + key + "': file not found: " + path);
}

inline void validate_layers(const RunConfig& c) {
  if (c.layers.empty()) throw ConfigError("config defines no [layer] sections");
  for (std::size_t k = 0; k < c.layers.size(); ++k) {
    const auto& l = c.layers[k];
    const std::string key = "layer[" + std::to_string(k + 1) + "].path";
    if (l.name.empty()) throw ConfigError("layer " + std::to_string(k + 1) + " has no name");
    require_file(key, l.path);
  }
}

inline void validate_for_fit(const RunConfig& c) {
  require_file("track", c.track);
  validate_layers(c);
  if (c.J < 2) throw ConfigError("J must be at least 2 (one used plus at least one available position)");
  if (!(c.window_hours > 0)) throw ConfigError("window_hours must be positive");
  const std::size_t p = c.p();
  if (!c.prior_mu.empty() && c.prior_mu.size() != p)
    throw ConfigError("prior_mu needs " + std::to_string(p) + " values");
  if (!c.prior_var.empty() && c.prior_var.size() != p)
    throw ConfigError("prior_var needs " + std::to_string(p) + " values");
  for (double v : c.prior_var)
    if (!(v > 0)) throw ConfigError("prior_var entries must be positive");
  if (!c.theta_init.empty() && c.theta_init.size() != p)
    throw ConfigError("theta_init needs " + std::to_string(p) + " values");
  if (c.mass.size() != 1 && c.mass.size() != p) throw ConfigError("mass needs 1 or " + std::to_string(p) + " values");
  for (double v : c.mass)
    if (!(v > 0)) throw ConfigError("mass entries must be positive");
}

inline void validate_for_simulate(const RunConfig& c) {
  validate_layers(c);
  if (c.theta_true.size() != c.p()) throw ConfigError("theta_true needs " + std::to_string(c.p()) + " values");
  if (c.n_steps < 2) throw ConfigError("n_steps must be at least 2");
  if (!(c.dt > 0)) throw ConfigError("dt must be positive");
  if (c.start.size() != 2) throw ConfigError("start needs two coordinates (x y)");
  if (c.delta_bar_mode != "harmonic_local" && c.delta_bar_mode != "fixed")
    throw ConfigError("delta_bar_mode must be harmonic_local or fixed");
  if (c.delta_bar_mode == "fixed" && !(c.delta_bar_value > 0))
    throw ConfigError("delta_bar_mode = fixed needs a positive delta_bar_value");
}

inline void validate_for_map(const RunConfig& c) {
  validate_layers(c);
  require_file("chain", c.chain);
  if (c.thin < 1) throw ConfigError("thin must be at least 1");
  if (!(c.dt > 0)) throw ConfigError("dt must be positive");
  for (const auto& q : c.quantities) parse_quantity(q);
  for (const auto& s : c.statistics) parse_statistic(s);
}

inline Prior make_prior(const RunConfig& c) {
  const auto p = static_cast<Eigen::Index>(c.p());
  Prior def = Prior::default_for(c.p(), c.intercept);
  Eigen::VectorXd mu = c.prior_mu.empty() ? def.mu() : Eigen::Map<const Eigen::VectorXd>(c.prior_mu.data(), p).eval();
  Eigen::VectorXd var = c.prior_var.empty() ? def.sigma().diagonal().eval()
                                            : Eigen::Map<const Eigen::VectorXd>(c.prior_var.data(), p).eval();
  return Prior::diagonal(mu, var);
}

inline HmcConfig make_hmc_config(const RunConfig& c, const Prior& prior) {
  HmcConfig h;
  h.step_size = c.step_size;
  h.trajectory_time = c.trajectory_time;
  h.iterations = c.iterations;
  h.burn_in = c.burn_in;
  h.seed = c.seed;
  h.mh_correction = c.mh_correction;
  const auto p = static_cast<Eigen::Index>(c.p());
  if (c.mass.size() == 1)
    h.mass_matrix = c.mass[0] * Eigen::MatrixXd::Identity(p, p);
  else
    h.mass_matrix = Eigen::Map<const Eigen::VectorXd>(c.mass.data(), p).asDiagonal().toDenseMatrix();
  h.theta_init = c.theta_init.empty() ? prior.mu() : Eigen::Map<const Eigen::VectorXd>(c.theta_init.data(), p).eval();
  h.validate();
  return h;
}

struct LoadedLayer {
  std::string name;
  bool standardized;
  double mean;
  double sd;
};

/// Reads every layer, standardizing those not marked raw.
inline CovariateStack load_stack(const RunConfig& c, std::vector<LoadedLayer>* info = nullptr) {
  CovariateStack stack(c.intercept);
  for (const auto& l : c.layers) {
    Raster r = read_ascii_grid(l.path);
    double mean = 0.0, sd = 1.0;
    if (l.standardize) {
      auto s = standardize(r);
      r = std::move(s.raster);
      mean = s.mean;
      sd = s.sd;
    }
    if (info) info->push_back({l.name, l.standardize, mean, sd});
    stack.add_layer(l.name, std::move(r));
  }
  return stack;
}

inline SimConfig make_sim_config(const RunConfig& c) {
  SimConfig s;
  s.theta_true = Eigen::Map<const Eigen::VectorXd>(c.theta_true.data(), static_cast<Eigen::Index>(c.theta_true.size()));
  s.n_steps = c.n_steps;
  s.dt = c.dt;
  s.start = {c.start.at(0), c.start.at(1)};
  s.delta_bar_mode.kind =
      c.delta_bar_mode == "fixed" ? DeltaBarMode::Kind::Fixed : DeltaBarMode::Kind::HarmonicLocal;
  s.delta_bar_mode.radius = c.delta_bar_radius;
  s.delta_bar_mode.value = c.delta_bar_value;
  s.seed = c.seed;
  return s;
}

}  // namespace mstpp
