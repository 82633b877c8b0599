#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "mstpp/error.hpp"

namespace mstpp {

/// Planar position in meters, in the raster's coordinate system.
struct Position {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Position&, const Position&) = default;
};

/**
 * Georeferencing of a regular grid. The extent is the half-open box
 * [xll, xll + ncols*cellsize) x [yll, yll + nrows*cellsize); row 0 is the
 * northernmost row.
 */
struct RasterHeader {
  int ncols = 0;
  int nrows = 0;
  double xll = 0.0;
  double yll = 0.0;
  double cellsize = 0.0;
  double nodata = -9999.0;

  friend bool operator==(const RasterHeader&, const RasterHeader&) = default;

  void validate() const {
    if (ncols < 1 || nrows < 1) throw DataError("raster must have at least one row and column");
    if (!(cellsize > 0.0) || !std::isfinite(cellsize)) throw DataError("cellsize must be positive");
    if (!std::isfinite(xll) || !std::isfinite(yll)) throw DataError("raster origin must be finite");
  }

  double xmax() const { return xll + ncols * cellsize; }
  double ymax() const { return yll + nrows * cellsize; }

  /// Cell containing p. Shared edges resolve to the larger index
  /// (right / up), so floor() gives the rule directly.
  std::optional<std::pair<int, int>> cell_of(Position p) const {
    if (!(p.x >= xll && p.x < xmax() && p.y >= yll && p.y < ymax())) return std::nullopt;
    int col = static_cast<int>(std::floor((p.x - xll) / cellsize));
    int up = static_cast<int>(std::floor((p.y - yll) / cellsize));
    // x/cellsize can round up to ncols for points a hair inside the edge.
    col = std::min(col, ncols - 1);
    up = std::min(up, nrows - 1);
    return std::pair{nrows - 1 - up, col};
  }

  Position cell_center(int row, int col) const {
    return {xll + (col + 0.5) * cellsize, yll + (nrows - 1 - row + 0.5) * cellsize};
  }
};

/// One covariate layer. Values are row-major, row 0 at the top.
class Raster {
 public:
  Raster() = default;
  Raster(RasterHeader header, std::vector<double> values)
      : header_(header), values_(std::move(values)) {
    header_.validate();
    if (values_.size() != static_cast<std::size_t>(header_.ncols) * header_.nrows)
      throw DataError("raster value count does not match header dimensions");
    for (double v : values_)
      if (!is_nodata(v) && !std::isfinite(v)) throw DataError("raster contains a non-finite value");
  }

  static Raster filled(RasterHeader header, double value) {
    return Raster(header, std::vector<double>(static_cast<std::size_t>(header.ncols) * header.nrows, value));
  }

  const RasterHeader& header() const { return header_; }
  int ncols() const { return header_.ncols; }
  int nrows() const { return header_.nrows; }
  std::span<const double> values() const { return values_; }

  double value_at(int row, int col) const { return values_[index(row, col)]; }
  void set(int row, int col, double v) { values_[index(row, col)] = v; }

  bool is_nodata(double v) const { return v == header_.nodata || std::isnan(v); }
  bool is_nodata_at(int row, int col) const { return is_nodata(value_at(row, col)); }

 private:
  std::size_t index(int row, int col) const {
    return static_cast<std::size_t>(row) * header_.ncols + col;
  }

  RasterHeader header_;
  std::vector<double> values_;
};

namespace detail {

inline std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

inline std::optional<double> parse_number(const std::string& tok) {
  if (tok.empty()) return std::nullopt;
  char* end = nullptr;
  double v = std::strtod(tok.c_str(), &end);
  if (end != tok.c_str() + tok.size()) return std::nullopt;
  return v;
}

inline std::string format_g10(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace detail

/**
 * Read an ESRI ASCII grid. The six header keys are matched
 * case-insensitively; xllcenter/yllcenter are accepted and shifted to
 * corner coordinates. Each data line must hold exactly ncols values.
 */
inline Raster read_ascii_grid(std::istream& in, const std::string& source = "<stream>") {
  RasterHeader h;
  bool have[6] = {};
  bool center_x = false, center_y = false;
  std::string line;
  std::size_t lineno = 0;
  int header_lines = 0;
  while (header_lines < 6 && std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string key, val, extra;
    if (!(ls >> key)) continue;
    if (!(ls >> val) || (ls >> extra)) throw ParseError(source, lineno, "malformed header line");
    key = detail::lower(key);
    auto num = detail::parse_number(val);
    if (!num) throw ParseError(source, lineno, "non-numeric header value '" + val + "'");
    if (key == "ncols" || key == "nrows") {
      if (*num != std::floor(*num) || *num < 1)
        throw ParseError(source, lineno, key + " must be a positive integer");
      (key == "ncols" ? h.ncols : h.nrows) = static_cast<int>(*num);
      have[key == "ncols" ? 0 : 1] = true;
    } else if (key == "xllcorner" || key == "xllcenter") {
      h.xll = *num, have[2] = true, center_x = key == "xllcenter";
    } else if (key == "yllcorner" || key == "yllcenter") {
      h.yll = *num, have[3] = true, center_y = key == "yllcenter";
    } else if (key == "cellsize") {
      if (!(*num > 0)) throw ParseError(source, lineno, "cellsize must be positive");
      h.cellsize = *num, have[4] = true;
    } else if (key == "nodata_value") {
      h.nodata = *num, have[5] = true;
    } else {
      throw ParseError(source, lineno, "unknown header key '" + key + "'");
    }
    ++header_lines;
  }
  for (bool b : have)
    if (!b) throw ParseError(source, lineno, "incomplete header (need ncols, nrows, xllcorner, yllcorner, cellsize, NODATA_value)");
  if (center_x) h.xll -= 0.5 * h.cellsize;
  if (center_y) h.yll -= 0.5 * h.cellsize;

  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(h.ncols) * h.nrows);
  int rows = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string tok;
    int count = 0;
    while (ls >> tok) {
      auto v = detail::parse_number(tok);
      if (!v) throw ParseError(source, lineno, "non-numeric value '" + tok + "'");
      values.push_back(*v);
      ++count;
    }
    if (count == 0) continue;
    if (count != h.ncols)
      throw ParseError(source, lineno,
                       "expected " + std::to_string(h.ncols) + " values, found " + std::to_string(count));
    if (++rows > h.nrows) throw ParseError(source, lineno, "more rows than nrows");
  }
  if (rows != h.nrows)
    throw ParseError(source, lineno,
                     "expected " + std::to_string(h.nrows) + " rows, found " + std::to_string(rows));
  return Raster(h, std::move(values));
}

inline Raster read_ascii_grid(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open raster '" + path + "'");
  return read_ascii_grid(in, path);
}

/// Values and header numbers are written with 10 significant digits.
inline void write_ascii_grid(std::ostream& out, const Raster& r) {
  const auto& h = r.header();
  out << "ncols " << h.ncols << '\n'
      << "nrows " << h.nrows << '\n'
      << "xllcorner " << detail::format_g10(h.xll) << '\n'
      << "yllcorner " << detail::format_g10(h.yll) << '\n'
      << "cellsize " << detail::format_g10(h.cellsize) << '\n'
      << "NODATA_value " << detail::format_g10(h.nodata) << '\n';
  for (int row = 0; row < h.nrows; ++row) {
    for (int col = 0; col < h.ncols; ++col) {
      if (col) out << ' ';
      out << detail::format_g10(r.value_at(row, col));
    }
    out << '\n';
  }
}

inline void write_ascii_grid(const std::string& path, const Raster& r) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write raster '" + path + "'");
  write_ascii_grid(out, r);
}

struct Standardized {
  Raster raster;
  double mean;
  double sd;
};

/// (v - mean) / sd over valid cells, population sd (divide by n).
inline Standardized standardize(const Raster& r) {
  double sum = 0.0;
  std::size_t n = 0;
  for (double v : r.values())
    if (!r.is_nodata(v)) sum += v, ++n;
  if (n < 2) throw DegenerateLayer("standardize needs at least two valid cells");
  const double mean = sum / static_cast<double>(n);
  double ss = 0.0;
  for (double v : r.values())
    if (!r.is_nodata(v)) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n));
  if (!(sd > 0.0)) throw DegenerateLayer("cannot standardize a constant layer");

  std::vector<double> out(r.values().begin(), r.values().end());
  for (double& v : out)
    if (!r.is_nodata(v)) v = (v - mean) / sd;
  return {Raster(r.header(), std::move(out)), mean, sd};
}

/**
 * Ordered covariate layers on one shared grid. The design vector w(s) is
 * (1, layer_1(s), ..., layer_k(s)) when the intercept is on.
 */
class CovariateStack {
 public:
  explicit CovariateStack(bool includes_intercept = true) : intercept_(includes_intercept) {}

  void add_layer(std::string name, Raster raster) {
    for (const auto& [n, _] : layers_)
      if (n == name) throw DataError("duplicate layer name '" + name + "'");
    if (!layers_.empty() && !(raster.header() == layers_.front().second.header()))
      throw DataError("layer '" + name + "' does not share the stack's grid");
    layers_.emplace_back(std::move(name), std::move(raster));
  }

  bool includes_intercept() const { return intercept_; }
  std::size_t layer_count() const { return layers_.size(); }
  /// Length of w(s).
  std::size_t p() const { return layers_.size() + (intercept_ ? 1 : 0); }
  const std::string& name(std::size_t k) const { return layers_[k].first; }
  const Raster& layer(std::size_t k) const { return layers_[k].second; }

  const RasterHeader& header() const {
    if (layers_.empty()) throw DataError("covariate stack has no layers");
    return layers_.front().second.header();
  }

  /// Names of the coefficients, intercept first.
  std::vector<std::string> coefficient_names() const {
    std::vector<std::string> out;
    if (intercept_) out.emplace_back("intercept");
    for (const auto& [n, _] : layers_) out.push_back(n);
    return out;
  }

  /// Cell covariates, or false when the cell is nodata in any layer.
  bool cell_covariates(int row, int col, std::span<double> w) const {
    std::size_t k = 0;
    if (intercept_) w[k++] = 1.0;
    for (const auto& [_, r] : layers_) {
      double v = r.value_at(row, col);
      if (r.is_nodata(v)) return false;
      w[k++] = v;
    }
    return true;
  }

  bool cell_valid(int row, int col) const {
    for (const auto& [_, r] : layers_)
      if (r.is_nodata_at(row, col)) return false;
    return true;
  }

  /// Non-throwing lookup for rejection loops.
  bool try_extract(Position s, std::span<double> w) const {
    auto cell = header().cell_of(s);
    return cell && cell_covariates(cell->first, cell->second, w);
  }

  /// Containing-cell lookup, no interpolation.
  void extract_into(Position s, std::span<double> w) const {
    auto cell = header().cell_of(s);
    if (!cell) throw OutOfDomain(s.x, s.y);
    std::size_t k = 0;
    if (intercept_) w[k++] = 1.0;
    for (const auto& [n, r] : layers_) {
      double v = r.value_at(cell->first, cell->second);
      if (r.is_nodata(v)) throw NoData(s.x, s.y, n);
      w[k++] = v;
    }
  }

  Eigen::VectorXd extract(Position s) const {
    Eigen::VectorXd w(static_cast<Eigen::Index>(p()));
    extract_into(s, std::span<double>(w.data(), p()));
    return w;
  }

 private:
  bool intercept_;
  std::vector<std::pair<std::string, Raster>> layers_;
};

}  // namespace mstpp
