// Copyright 2026 The enchvac Authors.
// SPDX-License-Identifier: Apache-2.0
#include "enchvac/sim/building.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>

#include "enchvac/util/rng.hpp"

namespace enchvac::sim {
namespace {

using he::SerializationError;

constexpr double kCpAir = 1005.0;   // J/(kg K)
constexpr double kRhoAir = 1.2;     // kg/m^3
constexpr double kRefTemp = 23.5;   // deg C hold target at the design peak
constexpr double kRefCo2 = 800.0;   // ppm hold target at the design peak
constexpr double kPeakAmbient = 38.0;
constexpr double kPeakOccupants = 8.0;

void require(bool cond, const std::string& msg) {
  if (!cond) throw InvalidParams(msg);
}

double conductance(const Eigen::MatrixXd& r_wall, int i, int j) {
  const double r = r_wall(i, j);
  return r > 0.0 ? 1.0 / r : 0.0;
}

// Linearized thermal step at a fixed control. Similar to a symmetric matrix
// via diag(sqrt(C)), so its spectrum is real and monotone in u; checking
// u = 0 and u = u_max bounds every admissible flow.
Eigen::MatrixXd thermal_step_matrix(const PlantConfig& cfg,
                                    const Eigen::VectorXd& u) {
  const int n = cfg.rooms();
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    double drain = 1.0 / cfg.R_amb(i) + u(i) * kCpAir;
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      const double g = conductance(cfg.R_wall, i, j);
      drain += g;
      a(i, j) = cfg.dt / cfg.C(i) * g;
    }
    a(i, i) = 1.0 - cfg.dt / cfg.C(i) * drain;
  }
  return a;
}

double spectral_radius(const Eigen::MatrixXd& a) {
  return Eigen::EigenSolver<Eigen::MatrixXd>(a, false)
      .eigenvalues()
      .cwiseAbs()
      .maxCoeff();
}

// --- calendar helpers (proleptic Gregorian, UTC only) ---

int64_t days_from_civil(int64_t y, int m, int d) {
  y -= m <= 2;
  const int64_t era = (y >= 0 ? y : y - 399) / 400;
  const int64_t yoe = y - era * 400;
  const int64_t doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const int64_t doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + doe - 719468;
}

void civil_from_days(int64_t z, int64_t* y, int* m, int* d) {
  z += 719468;
  const int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const int64_t doe = z - era * 146097;
  const int64_t yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const int64_t doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const int64_t mp = (5 * doy + 2) / 153;
  *d = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
  *m = static_cast<int>(mp + (mp < 10 ? 3 : -9));
  *y = yoe + era * 400 + (*m <= 2);
}

bool parse_iso8601(const std::string& s, int64_t* out) {
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, se = 0;
  char sep = 0, tail = 0;
  const int got = std::sscanf(s.c_str(), "%4d-%2d-%2d%c%2d:%2d:%2d%c", &y, &mo,
                              &d, &sep, &h, &mi, &se, &tail);
  if (got < 7 || (sep != 'T' && sep != ' ')) return false;
  if (got == 8 && tail != 'Z') return false;
  if (mo < 1 || mo > 12 || d < 1 || d > 31) return false;
  if (h < 0 || h > 23 || mi < 0 || mi > 59 || se < 0 || se > 60) return false;
  *out = days_from_civil(y, mo, d) * 86400 + h * 3600 + mi * 60 + se;
  return true;
}

std::string format_iso8601(int64_t unix_s) {
  int64_t days = unix_s / 86400;
  int64_t sod = unix_s % 86400;
  if (sod < 0) {
    sod += 86400;
    --days;
  }
  int64_t y;
  int m, d;
  civil_from_days(days, &y, &m, &d);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04" PRId64 "-%02d-%02dT%02d:%02d:%02dZ", y,
                m, d, static_cast<int>(sod / 3600),
                static_cast<int>(sod % 3600 / 60), static_cast<int>(sod % 60));
  return buf;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

bool parse_double(const std::string& s, double* out) {
  try {
    size_t pos = 0;
    *out = std::stod(s, &pos);
    return pos == s.size();
  } catch (const std::exception&) {
    return false;
  }
}

std::string strip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

}  // namespace

void PlantConfig::validate() const {
  const int n = rooms();
  require(n >= 1, "plant needs at least one room");
  require(R_amb.size() == n && V.size() == n && u_max.size() == n,
          "plant parameter vectors disagree on room count");
  require(R_wall.rows() == n && R_wall.cols() == n,
          "wall table must be rooms x rooms");
  for (int i = 0; i < n; ++i) {
    require(C(i) > 0.0 && R_amb(i) > 0.0 && V(i) > 0.0 && u_max(i) > 0.0,
            "capacitances, resistances, volumes and flow bounds must be "
            "positive");
    require(R_wall(i, i) == 0.0, "wall table diagonal must be zero");
    for (int j = 0; j < n; ++j) {
      require(R_wall(i, j) >= 0.0, "wall resistances must be nonnegative");
      require(R_wall(i, j) == R_wall(j, i), "wall table must be symmetric");
    }
  }
  require(dt > 0.0 && std::isfinite(dt), "dt must be positive");
  require(std::isfinite(t_sup) && std::isfinite(c_sup) && c_sup >= 0.0,
          "supply conditions must be finite, supply CO2 nonnegative");
  require(gen_per_occ >= 0.0 && std::isfinite(gen_per_occ),
          "CO2 generation must be nonnegative");

  const double rho0 = spectral_radius(
      thermal_step_matrix(*this, Eigen::VectorXd::Zero(n)));
  const double rho1 = spectral_radius(thermal_step_matrix(*this, u_max));
  require(std::max(rho0, rho1) < 1.0,
          "thermal step is unstable at dt; shrink dt or the conductances");
  for (int i = 0; i < n; ++i) {
    // At u = 0 the CO2 balance is a pure mass integrator (eigenvalue one by
    // construction); contraction is only required under flow.
    require(dt * u_max(i) / (kRhoAir * V(i)) < 2.0,
            "CO2 step is unstable at full flow; shrink dt or u_max");
  }

  // Design-peak feasibility: with every room pinned at the reference the
  // wall terms vanish, so the required flow solves each room alone.
  require(t_sup < kRefTemp, "supply air cannot cool below the reference");
  require(c_sup < kRefCo2, "supply CO2 cannot dilute below the reference");
  for (int i = 0; i < n; ++i) {
    const double need_t = (kPeakAmbient - kRefTemp) / R_amb(i) /
                          (kCpAir * (kRefTemp - t_sup));
    const double need_c =
        kRhoAir * gen_per_occ * kPeakOccupants / (kRefCo2 - c_sup);
    require(u_max(i) >= std::max(need_t, need_c),
            "u_max cannot hold the references at the design peak (room " +
                std::to_string(i) + ")");
  }
}

PlantConfig PlantConfig::standard() {
  PlantConfig cfg;
  const int n = 4;
  cfg.C = Eigen::VectorXd::Constant(n, 1.2e6);
  cfg.R_amb = Eigen::VectorXd::Constant(n, 0.012);
  cfg.V = Eigen::VectorXd::Constant(n, 200.0);
  cfg.u_max = Eigen::VectorXd::Constant(n, 0.5);
  cfg.R_wall = Eigen::MatrixXd::Zero(n, n);
  const int pairs[4][2] = {{0, 1}, {0, 2}, {1, 3}, {2, 3}};
  for (const auto& p : pairs) {
    cfg.R_wall(p[0], p[1]) = 0.02;
    cfg.R_wall(p[1], p[0]) = 0.02;
  }
  return cfg;
}

PlantState plant_step(const PlantState& s, const Eigen::VectorXd& u,
                      double ambient_c, const Eigen::VectorXd& occupants,
                      const PlantConfig& cfg) {
  const int n = cfg.rooms();
  require(s.temps.size() == n && s.co2.size() == n,
          "plant state has the wrong dimension");
  require(u.size() == n, "control has the wrong dimension");
  require(occupants.size() == n, "occupancy has the wrong dimension");
  require(std::isfinite(ambient_c), "ambient temperature must be finite");
  require(s.temps.allFinite() && s.co2.allFinite(),
          "plant state is non-finite");
  for (int i = 0; i < n; ++i) {
    require(std::isfinite(u(i)) && u(i) >= 0.0 && u(i) <= cfg.u_max(i),
            "control out of bounds at room " + std::to_string(i));
    require(std::isfinite(occupants(i)) && occupants(i) >= 0.0,
            "occupancy must be nonnegative");
  }

  PlantState next;
  next.temps.resize(n);
  next.co2.resize(n);
  for (int i = 0; i < n; ++i) {
    double heat = (ambient_c - s.temps(i)) / cfg.R_amb(i);
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      heat += conductance(cfg.R_wall, i, j) * (s.temps(j) - s.temps(i));
    }
    heat += u(i) * kCpAir * (cfg.t_sup - s.temps(i));
    next.temps(i) = s.temps(i) + cfg.dt / cfg.C(i) * heat;

    const double source = cfg.gen_per_occ * occupants(i);
    const double purge = u(i) / kRhoAir * (s.co2(i) - cfg.c_sup);
    next.co2(i) = s.co2(i) + cfg.dt / cfg.V(i) * (source - purge);
  }
  require(next.temps.allFinite() && next.co2.allFinite(),
          "plant step produced a non-finite state");
  return next;
}

void OccupancySchedule::validate() const {
  require(weekday.rows() == 24 && weekend.rows() == 24,
          "occupancy tables need one row per hour");
  require(weekday.cols() >= 1 && weekday.cols() == weekend.cols(),
          "occupancy tables disagree on room count");
  for (const auto* table : {&weekday, &weekend}) {
    for (int h = 0; h < 24; ++h) {
      for (int r = 0; r < table->cols(); ++r) {
        const double c = (*table)(h, r);
        require(std::isfinite(c) && c >= 0.0 && c <= 8.0,
                "occupant counts must lie in [0, 8]");
      }
    }
  }
  require(!weekend_active.empty(), "need at least one weekend activity flag");
}

OccupancySchedule OccupancySchedule::standard() {
  OccupancySchedule s;
  s.weekday = Eigen::MatrixXd::Zero(24, 4);
  s.weekend = Eigen::MatrixXd::Zero(24, 4);
  auto row = [](double a, double b, double c, double d) {
    return Eigen::RowVector4d(a, b, c, d);
  };
  s.weekday.row(8) = row(1, 1, 1, 0);
  for (int h = 9; h <= 11; ++h) s.weekday.row(h) = row(2, 2, 2, 1);
  s.weekday.row(12) = row(1, 1, 2, 1);
  for (int h = 13; h <= 16; ++h) s.weekday.row(h) = row(2, 2, 2, 2);
  s.weekday.row(17) = row(1, 2, 1, 1);
  s.weekday.row(18) = row(1, 0, 1, 0);
  for (int h = 10; h <= 13; ++h) s.weekend.row(h) = row(0, 1, 0, 1);
  for (int h = 14; h <= 15; ++h) s.weekend.row(h) = row(0, 1, 0, 0);
  s.weekend_active = {1, 0, 1, 0, 1};
  return s;
}

Eigen::VectorXd occupancy_at(int64_t unix_s, const OccupancySchedule& sched) {
  require(unix_s >= 0, "timestamp out of range");
  const int64_t days = unix_s / 86400;
  const int dow = static_cast<int>((days + 4) % 7);  // 0 = Sunday
  const int hour = static_cast<int>(unix_s % 86400 / 3600);
  const bool weekend = dow == 0 || dow == 6;
  if (!weekend) return sched.weekday.row(hour);
  // Weeks run Monday through Sunday; day 4 of the epoch was a Monday.
  const size_t week = static_cast<size_t>((days + 3) / 7);
  if (!sched.weekend_active[week % sched.weekend_active.size()])
    return Eigen::VectorXd::Zero(sched.weekend.cols());
  return sched.weekend.row(hour);
}

double WeatherTrace::at(int64_t unix_s) const {
  const auto n = static_cast<int64_t>(ambient_c.size());
  const double steps = static_cast<double>(unix_s - t0) / dt;
  const auto idx = static_cast<int64_t>(std::floor(steps));
  require(idx >= 0 && idx < n,
          "timestamp " + format_iso8601(unix_s) + " outside the trace");
  return ambient_c[static_cast<size_t>(idx)];
}

void WeatherTrace::validate() const {
  require(dt > 0.0 && std::isfinite(dt), "trace dt must be positive");
  require(!ambient_c.empty(), "trace is empty");
  for (double v : ambient_c)
    require(std::isfinite(v), "trace temperatures must be finite");
}

WeatherTrace load_weather(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SerializationError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) ||
      strip_cr(line) != "timestamp_iso8601,ambient_c")
    throw SerializationError("expected header timestamp_iso8601,ambient_c in " +
                             path.string());

  WeatherTrace tr;
  tr.ambient_c.clear();
  int64_t prev = 0;
  bool have_dt = false;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    int64_t ts = 0;
    double temp = 0.0;
    if (cells.size() != 2 || !parse_iso8601(cells[0], &ts) ||
        !parse_double(cells[1], &temp))
      throw SerializationError("malformed weather row at line " +
                               std::to_string(line_no) + " of " +
                               path.string());
    if (tr.ambient_c.empty()) {
      tr.t0 = ts;
    } else {
      if (ts <= prev)
        throw SerializationError("timestamps must increase at line " +
                                 std::to_string(line_no) + " (" + cells[0] +
                                 ")");
      const auto gap = static_cast<double>(ts - prev);
      if (!have_dt) {
        tr.dt = gap;
        have_dt = true;
      } else if (gap != tr.dt) {
        throw SerializationError("weather trace has a gap before " + cells[0]);
      }
    }
    prev = ts;
    tr.ambient_c.push_back(temp);
  }
  if (tr.ambient_c.size() < 2)
    throw SerializationError("weather trace needs at least two samples");
  tr.validate();
  return tr;
}

OccupancySchedule load_occupancy(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SerializationError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) ||
      strip_cr(line) != "daytype,hour,room1,room2,room3,room4")
    throw SerializationError(
        "expected header daytype,hour,room1,room2,room3,room4 in " +
        path.string());

  OccupancySchedule s;
  s.weekday = Eigen::MatrixXd::Zero(24, 4);
  s.weekend = Eigen::MatrixXd::Zero(24, 4);
  s.weekend_active = {1};
  bool seen[2][24] = {};
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    const std::string where =
        " at line " + std::to_string(line_no) + " of " + path.string();
    if (cells.size() != 6)
      throw SerializationError("malformed occupancy row" + where);
    int day;
    if (cells[0] == "weekday")
      day = 0;
    else if (cells[0] == "weekend")
      day = 1;
    else
      throw SerializationError("unknown daytype '" + cells[0] + "'" + where);
    double hour_raw = 0.0;
    if (!parse_double(cells[1], &hour_raw) || hour_raw != std::floor(hour_raw) ||
        hour_raw < 0 || hour_raw > 23)
      throw SerializationError("hour must be an integer in [0, 23]" + where);
    const int hour = static_cast<int>(hour_raw);
    if (seen[day][hour])
      throw SerializationError("duplicate occupancy row" + where);
    seen[day][hour] = true;
    Eigen::MatrixXd& table = day == 0 ? s.weekday : s.weekend;
    for (int r = 0; r < 4; ++r) {
      double c = 0.0;
      if (!parse_double(cells[2 + static_cast<size_t>(r)], &c))
        throw SerializationError("malformed occupant count" + where);
      table(hour, r) = c;
    }
  }
  for (int day = 0; day < 2; ++day)
    for (int hour = 0; hour < 24; ++hour)
      if (!seen[day][hour])
        throw SerializationError(
            std::string("missing occupancy row for ") +
            (day == 0 ? "weekday" : "weekend") + " hour " +
            std::to_string(hour) + " in " + path.string());
  s.validate();
  return s;
}

WeatherTrace synth_weather(int days, uint64_t seed, double mean_c,
                           double amplitude_c, double noise_c, double dt,
                           int64_t t0) {
  require(days >= 1, "need at least one day");
  require(dt > 0.0 && std::isfinite(dt), "dt must be positive");
  require(std::isfinite(mean_c) && std::isfinite(amplitude_c) &&
              std::isfinite(noise_c) && amplitude_c >= 0.0 && noise_c >= 0.0,
          "sinusoid parameters must be finite, amplitude and noise "
          "nonnegative");
  WeatherTrace tr;
  tr.t0 = t0;
  tr.dt = dt;
  const auto n = static_cast<int64_t>(std::llround(days * 86400.0 / dt));
  require(n >= 2, "trace needs at least two samples");
  util::Rng rng(seed);
  tr.ambient_c.reserve(static_cast<size_t>(n));
  for (int64_t k = 0; k < n; ++k) {
    const auto t = static_cast<int64_t>(t0 + std::llround(k * dt));
    const double sod = static_cast<double>((t % 86400 + 86400) % 86400);
    // Peak at 15:00, trough at 03:00.
    const double arg =
        2.0 * std::numbers::pi * sod / 86400.0 - 0.75 * std::numbers::pi;
    tr.ambient_c.push_back(mean_c + amplitude_c * std::sin(arg) +
                           noise_c * rng.next_gaussian());
  }
  tr.validate();
  return tr;
}

}  // namespace enchvac::sim
