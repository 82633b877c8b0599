#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mstpp/error.hpp"
#include "mstpp/geo_raster.hpp"

namespace mstpp {

/// One relocation. t in hours, x/y in meters.
struct Fix {
  double t = 0.0;
  double x = 0.0;
  double y = 0.0;
  Position position() const { return {x, y}; }
};

/**
 * A validated telemetry track: at least three fixes with strictly
 * increasing times. Step i (1-based, i = 2..n) joins fix i-1 to fix i.
 */
class Track {
 public:
  Track() = default;
  Track(std::vector<Fix> fixes, std::string source_id = {})
      : fixes_(std::move(fixes)), source_id_(std::move(source_id)) {
    if (fixes_.size() < 3) throw DataError("track needs at least 3 fixes, got " + std::to_string(fixes_.size()));
    for (std::size_t k = 0; k < fixes_.size(); ++k) {
      const auto& f = fixes_[k];
      if (!std::isfinite(f.t) || !std::isfinite(f.x) || !std::isfinite(f.y))
        throw DataError("fix " + std::to_string(k + 1) + " has a non-finite field");
      if (k > 0 && f.t == fixes_[k - 1].t)
        throw DataError("duplicate timestamp at fix " + std::to_string(k + 1));
      if (k > 0 && f.t < fixes_[k - 1].t)
        throw DataError("timestamps not increasing at fix " + std::to_string(k + 1));
    }
  }

  std::size_t size() const { return fixes_.size(); }
  std::size_t step_count() const { return fixes_.size() - 1; }
  const Fix& operator[](std::size_t k) const { return fixes_[k]; }
  const std::vector<Fix>& fixes() const { return fixes_; }
  const std::string& source_id() const { return source_id_; }

 private:
  std::vector<Fix> fixes_;
  std::string source_id_;
};

struct Step {
  std::size_t index;  // 1-based i in 2..n
  Position prev;
  Position curr;
  double dt;
};

inline std::vector<Step> steps(const Track& track) {
  std::vector<Step> out;
  out.reserve(track.step_count());
  for (std::size_t k = 1; k < track.size(); ++k)
    out.push_back({k + 1, track[k - 1].position(), track[k].position(), track[k].t - track[k - 1].t});
  return out;
}

/// delta_bar[k] belongs to step k+2 (1-based), i.e. fix k+1.
struct MotilitySeries {
  std::vector<double> delta_bar;
  std::vector<std::size_t> n_i;
  double window_hours = 0.0;
};

inline constexpr double kDeltaFloor = 1e-6;  // m^2/h

/**
 * Moving-average motility estimate. For each step i, averages
 * |s_j - s_{j-1}|^2 / (4 dt_j) over the steps j with |t_j - t_i| <=
 * window/2 (t_j is the end time of step j), truncated at the track ends.
 * Values below kDeltaFloor are clamped to it.
 */
inline MotilitySeries estimate_delta_bar(const Track& track, double window_hours = 70.0) {
  if (!(window_hours > 0.0)) throw DataError("window_hours must be positive");
  const auto st = steps(track);
  const std::size_t m = st.size();
  std::vector<double> term(m), t(m);
  for (std::size_t j = 0; j < m; ++j) {
    const double dx = st[j].curr.x - st[j].prev.x, dy = st[j].curr.y - st[j].prev.y;
    term[j] = (dx * dx + dy * dy) / (4.0 * st[j].dt);
    t[j] = track[j + 1].t;
  }
  const double half = 0.5 * window_hours;
  MotilitySeries out;
  out.window_hours = window_hours;
  out.delta_bar.resize(m);
  out.n_i.resize(m);
  std::size_t lo = 0, hi = 0;  // window is [lo, hi)
  for (std::size_t i = 0; i < m; ++i) {
    while (t[i] - t[lo] > half) ++lo;
    if (hi < i + 1) hi = i + 1;
    while (hi < m && t[hi] - t[i] <= half) ++hi;
    double sum = 0.0;
    for (std::size_t j = lo; j < hi; ++j) sum += term[j];
    const auto n = hi - lo;
    out.n_i[i] = n;
    out.delta_bar[i] = std::max(sum / static_cast<double>(n), kDeltaFloor);
  }
  return out;
}

namespace detail {

/// ISO-8601 "YYYY-MM-DD[T ]hh:mm[:ss[.fff]][Z]" to hours since 1970-01-01 UTC.
inline std::optional<double> parse_iso8601_hours(const std::string& s) {
  int Y, M, D, h = 0, mi = 0;
  double sec = 0.0;
  char sep = 0;
  int consumed = 0;
  if (std::sscanf(s.c_str(), "%d-%d-%d%c%d:%d%n", &Y, &M, &D, &sep, &h, &mi, &consumed) != 6) return std::nullopt;
  if (sep != 'T' && sep != ' ') return std::nullopt;
  std::string rest = s.substr(static_cast<std::size_t>(consumed));
  if (!rest.empty() && rest[0] == ':') {
    char* end = nullptr;
    sec = std::strtod(rest.c_str() + 1, &end);
    rest = end;
  }
  if (!rest.empty() && rest != "Z") return std::nullopt;
  using namespace std::chrono;
  const year_month_day ymd{year{Y}, month{static_cast<unsigned>(M)}, day{static_cast<unsigned>(D)}};
  if (!ymd.ok() || h < 0 || h > 23 || mi < 0 || mi > 59 || sec < 0 || sec >= 61) return std::nullopt;
  const double days = sys_days(ymd).time_since_epoch().count();
  return days * 24.0 + h + mi / 60.0 + sec / 3600.0;
}

inline std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ls(line);
  while (std::getline(ls, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace detail

/// CSV with header t,x,y. t is decimal hours or an ISO-8601 timestamp.
inline Track read_track(std::istream& in, const std::string& source = "<stream>") {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!detail::trim(line).empty()) break;
  }
  auto header = detail::split_csv(line);
  for (auto& h : header) h = detail::lower(h);
  if (header != std::vector<std::string>{"t", "x", "y"})
    throw ParseError(source, lineno, "expected header 't,x,y'");

  std::vector<Fix> fixes;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    auto cells = detail::split_csv(line);
    if (cells.size() != 3) throw ParseError(source, lineno, "expected 3 fields");
    Fix f;
    if (auto t = detail::parse_number(cells[0])) {
      f.t = *t;
    } else if (auto iso = detail::parse_iso8601_hours(cells[0])) {
      f.t = *iso;
    } else {
      throw ParseError(source, lineno, "bad time '" + cells[0] + "'");
    }
    auto x = detail::parse_number(cells[1]);
    auto y = detail::parse_number(cells[2]);
    if (!x || !y) throw ParseError(source, lineno, "non-numeric coordinate");
    f.x = *x, f.y = *y;
    if (!fixes.empty() && f.t == fixes.back().t)
      throw ParseError(source, lineno, "duplicate timestamp");
    if (!fixes.empty() && f.t < fixes.back().t)
      throw ParseError(source, lineno, "timestamps out of order");
    fixes.push_back(f);
  }
  return Track(std::move(fixes), source);
}

inline Track read_track(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open track '" + path + "'");
  return read_track(in, path);
}

inline void write_track(std::ostream& out, const Track& track) {
  out << "t,x,y\n";
  char buf[96];
  for (const auto& f : track.fixes()) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", f.t, f.x, f.y);
    out << buf;
  }
}

inline void write_track(const std::string& path, const Track& track) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write track '" + path + "'");
  write_track(out, track);
}

}  // namespace mstpp
