// Copyright 2026 The enchvac Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "enchvac/he/he.hpp"

namespace enchvac::sim {

using he::InvalidParams;

// 2016-07-04T00:00:00Z, a Monday; traces anchored here start on a weekday.
inline constexpr int64_t kDefaultTraceStart = 1467590400;

// First-order RC thermal network with CO2 mass balance. Walls appear as
// pairwise resistances; a zero entry in R_wall means no shared wall. Each
// room is served by one cooled supply flow at fixed temperature and CO2.
struct PlantConfig {
  Eigen::VectorXd C;       // J/K thermal capacitance per room
  Eigen::VectorXd R_amb;   // K/W envelope resistance to ambient
  Eigen::MatrixXd R_wall;  // K/W inter-room, symmetric, 0 = not adjacent
  Eigen::VectorXd V;       // m^3 room volume
  double t_sup = 14.0;     // deg C supply air
  double c_sup = 400.0;    // ppm supply air CO2
  double gen_per_occ = 5.0;  // ppm m^3/s CO2 generation per occupant
  Eigen::VectorXd u_max;   // kg/s supply mass flow ceiling per room
  double dt = 900.0;       // s

  int rooms() const { return static_cast<int>(C.size()); }

  // Throws InvalidParams unless every capacitance, resistance, volume and
  // flow bound is positive, the wall table is symmetric with a zero
  // diagonal, the linearized thermal step has spectral radius < 1 at both
  // control extremes (monotonicity in u makes the extremes sufficient), the
  // CO2 step contracts at full flow (at u = 0 it is a mass integrator and
  // marginal by construction), and u_max can hold the 23.5 degC / 800 ppm
  // references against a 38 degC, eight-occupant design peak.
  void validate() const;

  // Four rooms in a 2x2 outlay (adjacent pairs 0-1, 0-2, 1-3, 2-3), sized
  // for a 3000 sq ft floor: envelope time constant C * R_amb = 4 h.
  static PlantConfig standard();
};

struct PlantState {
  Eigen::VectorXd temps;  // deg C
  Eigen::VectorXd co2;    // ppm
};

// One explicit Euler step:
//   T_i' = T_i + dt/C_i [ (T_amb - T_i)/R_i + sum_j (T_j - T_i)/R_ij
//                         + u_i c_p (T_sup - T_i) ]
//   c_i' = c_i + dt/V_i [ g occ_i - (u_i / rho_air)(c_i - c_sup) ]
// Deterministic. Throws InvalidParams when u leaves [0, u_max], occupants
// are negative, dims disagree, or the result is non-finite.
PlantState plant_step(const PlantState& s, const Eigen::VectorXd& u,
                      double ambient_c, const Eigen::VectorXd& occupants,
                      const PlantConfig& cfg);

struct OccupancySchedule {
  Eigen::MatrixXd weekday;  // 24 x rooms occupant counts
  Eigen::MatrixXd weekend;  // 24 x rooms
  // Per-calendar-week activity of the weekend schedule, cycled when the
  // horizon runs past the end; an inactive weekend reads as empty rooms.
  std::vector<uint8_t> weekend_active;

  // Throws InvalidParams unless both tables have 24 rows, matching room
  // counts, entries in [0, 8], and at least one activity flag.
  void validate() const;

  // Office-hours weekday profile, light half-day weekends, with weekends
  // active on an alternating pattern.
  static OccupancySchedule standard();
};

// Occupant counts at a UTC timestamp. Weeks run Monday through Sunday;
// Saturday and Sunday read the weekend table, gated by the week's activity
// flag. Throws InvalidParams for negative timestamps.
Eigen::VectorXd occupancy_at(int64_t unix_s, const OccupancySchedule& sched);

// Uniformly sampled ambient temperature trace.
struct WeatherTrace {
  int64_t t0 = kDefaultTraceStart;  // unix seconds of the first sample
  double dt = 900.0;
  std::vector<double> ambient_c;

  // Sample-and-hold lookup. Throws InvalidParams outside [t0, t0 + n dt).
  double at(int64_t unix_s) const;
  void validate() const;
};

// CSV with header timestamp_iso8601,ambient_c. Timestamps must be strictly
// increasing and uniformly spaced; violations and malformed rows are
// reported with the offending line number or timestamp.
WeatherTrace load_weather(const std::filesystem::path& path);

// CSV with header daytype,hour,room1,room2,room3,room4; daytype is weekday
// or weekend and every hour 0..23 must appear once per daytype. Activity
// flags default to all-active.
OccupancySchedule load_occupancy(const std::filesystem::path& path);

// Daily sinusoid peaking mid-afternoon (15:00) plus seeded Gaussian noise.
// Deterministic per seed; amplitude and noise 0 give a constant trace.
WeatherTrace synth_weather(int days, uint64_t seed, double mean_c = 30.0,
                           double amplitude_c = 8.0, double noise_c = 0.0,
                           double dt = 900.0, int64_t t0 = kDefaultTraceStart);

}  // namespace enchvac::sim
