// Copyright 2026 The enchvac Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Configuration, plant adaptation, metrics and persistence. The closed loop,
// sweep and bench live in loop.cpp.
#include "enchvac/harness/harness.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>

#include "enchvac/util/rng.hpp"

namespace enchvac::harness {
namespace {

using he::SerializationError;
using nlohmann::json;

void require(bool cond, const std::string& msg) {
  if (!cond) throw InvalidParams(msg);
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
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

double parse_double_or_throw(const std::string& s, const std::string& where) {
  try {
    size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw SerializationError("malformed number '" + s + "' " + where);
  }
}

uint64_t parse_u64_or_throw(const std::string& s, const std::string& where) {
  try {
    size_t pos = 0;
    uint64_t v = std::stoull(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw SerializationError("malformed count '" + s + "' " + where);
  }
}

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path())
    std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out)
    throw SerializationError("cannot open " + path.string() + " for writing");
  return out;
}

constexpr char kTrajectoryHeader[] =
    "step,a,t1,t2,t3,t4,c1,c2,c3,c4,u1,u2,u3,u4,ambient_c,occ1,occ2,occ3,"
    "occ4,bytes_up,bytes_down";
constexpr char kMetricsHeader[] =
    "beta,comm_rate,temp_violation_pct,co2_violation_pct,max_temp_dev_c,"
    "max_co2_dev_ppm,bytes_up,bytes_down,wall_s_per_step";

}  // namespace

Eigen::VectorXd to_features(const Eigen::VectorXd& temps,
                            const Eigen::VectorXd& co2) {
  require(temps.size() == co2.size(),
          "temperature and CO2 vectors disagree on room count");
  const auto n = temps.size();
  Eigen::VectorXd f(2 * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    f(i) = (temps(i) - kTempRef) / kTempFeatScale;
    f(n + i) = (co2(i) - kCo2Ref) / kCo2FeatScale;
  }
  return f;
}

BuildingPlant::BuildingPlant(sim::PlantConfig pc, sim::OccupancySchedule sched,
                             sim::WeatherTrace weather, int horizon_steps)
    : pc_(std::move(pc)),
      sched_(std::move(sched)),
      weather_(std::move(weather)),
      horizon_steps_(horizon_steps) {
  pc_.validate();
  sched_.validate();
  weather_.validate();
  require(sched_.weekday.cols() == pc_.rooms(),
          "occupancy schedule does not match the room count");
  require(horizon_steps_ >= 1, "episode horizon must be positive");
  require(weather_.dt == pc_.dt, "weather trace dt must match the plant dt");
  const auto samples = static_cast<int64_t>(weather_.ambient_c.size());
  require(samples >= horizon_steps_,
          "weather trace shorter than the episode horizon");
  max_offset_ = samples - horizon_steps_;
  state_.temps = Eigen::VectorXd::Constant(pc_.rooms(), kTempRef);
  state_.co2 = Eigen::VectorXd::Constant(pc_.rooms(), 500.0);
}

Eigen::VectorXd BuildingPlant::reset(uint64_t seed) {
  util::Rng rng(seed);
  start_ = static_cast<int64_t>(
      rng.next_below(static_cast<uint64_t>(max_offset_) + 1));
  k_ = 0;
  for (int i = 0; i < pc_.rooms(); ++i)
    state_.temps(i) = kTempRef + (2.0 * rng.next_double() - 1.0);
  for (int i = 0; i < pc_.rooms(); ++i)
    state_.co2(i) = 500.0 + 100.0 * (2.0 * rng.next_double() - 1.0);
  return to_features(state_.temps, state_.co2);
}

int64_t BuildingPlant::clock() const {
  return weather_.t0 +
         static_cast<int64_t>(std::llround((start_ + k_) * weather_.dt));
}

double BuildingPlant::ambient() const {
  return weather_.ambient_c[static_cast<size_t>(start_ + k_)];
}

Eigen::VectorXd BuildingPlant::occupants() const {
  return sim::occupancy_at(clock(), sched_);
}

Eigen::VectorXd BuildingPlant::step(const Eigen::VectorXd& u) {
  require(k_ < horizon_steps_, "episode ran past its declared horizon");
  state_ = sim::plant_step(state_, u, ambient(), occupants(), pc_);
  ++k_;
  return to_features(state_.temps, state_.co2);
}

void RunConfig::validate() const {
  require(backend == "plain" || backend == "reference" || backend == "rlwe",
          "backend must be plain, reference or rlwe");
  require(trigger == "event" || trigger == "periodic",
          "trigger must be event or periodic");
  require(activation == "fitted" || activation == "paper",
          "activation must be fitted or paper");
  he::HeParams::preset(he_preset).validate();  // preset names must resolve
  require(beta >= 0.0 && std::isfinite(beta), "beta must be nonnegative");
  require(t_s >= 1, "t_s must be at least 1");
  require(horizon >= 1, "horizon must be positive");
  require(train_horizon >= 2, "train_horizon must be at least 2");
  require(co2_state_weight > 0.0 && control_weight > 0.0 &&
              trigger_cost_scale > 0.0,
          "cost weights must be positive");
  require(weather_days >= 1, "weather_days must be positive");
  require(weather_amplitude_c >= 0.0 && weather_noise_c >= 0.0,
          "weather amplitude and noise must be nonnegative");
  require(controller_epochs >= 0 && trigger_episodes >= 1,
          "training lengths must be positive");
  require(controller_hidden > 0 && trigger_hidden > 0,
          "hidden widths must be positive");
  require(trigger_learning_rate > 0.0, "trigger learning rate must be positive");
  require(!weekend_active.empty(), "weekend_active must not be empty");
}

RunConfig load_run_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path))
    throw InvalidParams("config file not found: " + path.string());
  std::ifstream in(path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw SerializationError("cannot parse config " + path.string() + ": " +
                             e.what());
  }
  if (!j.is_object())
    throw SerializationError("config " + path.string() +
                             " must be a JSON object");

  RunConfig cfg;
  try {
    for (const auto& [key, val] : j.items()) {
      if (key == "backend") cfg.backend = val.get<std::string>();
      else if (key == "trigger") cfg.trigger = val.get<std::string>();
      else if (key == "he_preset") cfg.he_preset = val.get<std::string>();
      else if (key == "activation") cfg.activation = val.get<std::string>();
      else if (key == "seed") cfg.seed = val.get<uint64_t>();
      else if (key == "beta") cfg.beta = val.get<double>();
      else if (key == "t_s") cfg.t_s = val.get<int>();
      else if (key == "horizon") cfg.horizon = val.get<int>();
      else if (key == "co2_state_weight") cfg.co2_state_weight = val.get<double>();
      else if (key == "control_weight") cfg.control_weight = val.get<double>();
      else if (key == "trigger_cost_scale") cfg.trigger_cost_scale = val.get<double>();
      else if (key == "controller_checkpoint") cfg.controller_checkpoint = val.get<std::string>();
      else if (key == "trigger_checkpoint") cfg.trigger_checkpoint = val.get<std::string>();
      else if (key == "weather_csv") cfg.weather_csv = val.get<std::string>();
      else if (key == "occupancy_csv") cfg.occupancy_csv = val.get<std::string>();
      else if (key == "weekend_active") cfg.weekend_active = val.get<std::vector<uint8_t>>();
      else if (key == "weather_days") cfg.weather_days = val.get<int>();
      else if (key == "weather_seed") cfg.weather_seed = val.get<uint64_t>();
      else if (key == "weather_mean_c") cfg.weather_mean_c = val.get<double>();
      else if (key == "weather_amplitude_c") cfg.weather_amplitude_c = val.get<double>();
      else if (key == "weather_noise_c") cfg.weather_noise_c = val.get<double>();
      else if (key == "controller_epochs") cfg.controller_epochs = val.get<int>();
      else if (key == "controller_hidden") cfg.controller_hidden = val.get<int>();
      else if (key == "trigger_episodes") cfg.trigger_episodes = val.get<int>();
      else if (key == "trigger_hidden") cfg.trigger_hidden = val.get<int>();
      else if (key == "trigger_learning_rate") cfg.trigger_learning_rate = val.get<double>();
      else if (key == "train_horizon") cfg.train_horizon = val.get<int>();
      else
        throw SerializationError("unknown config key '" + key + "' in " +
                                 path.string());
    }
  } catch (const json::exception& e) {
    throw SerializationError("bad value type in config " + path.string() +
                             ": " + e.what());
  }
  cfg.validate();
  return cfg;
}

std::string run_config_json(const RunConfig& cfg) {
  json j;
  j["backend"] = cfg.backend;
  j["trigger"] = cfg.trigger;
  j["he_preset"] = cfg.he_preset;
  j["activation"] = cfg.activation;
  j["seed"] = cfg.seed;
  j["beta"] = cfg.beta;
  j["t_s"] = cfg.t_s;
  j["horizon"] = cfg.horizon;
  j["co2_state_weight"] = cfg.co2_state_weight;
  j["control_weight"] = cfg.control_weight;
  j["trigger_cost_scale"] = cfg.trigger_cost_scale;
  j["controller_checkpoint"] = cfg.controller_checkpoint;
  j["trigger_checkpoint"] = cfg.trigger_checkpoint;
  j["weather_csv"] = cfg.weather_csv;
  j["occupancy_csv"] = cfg.occupancy_csv;
  j["weekend_active"] = cfg.weekend_active;
  j["weather_days"] = cfg.weather_days;
  j["weather_seed"] = cfg.weather_seed;
  j["weather_mean_c"] = cfg.weather_mean_c;
  j["weather_amplitude_c"] = cfg.weather_amplitude_c;
  j["weather_noise_c"] = cfg.weather_noise_c;
  j["controller_epochs"] = cfg.controller_epochs;
  j["controller_hidden"] = cfg.controller_hidden;
  j["trigger_episodes"] = cfg.trigger_episodes;
  j["trigger_hidden"] = cfg.trigger_hidden;
  j["trigger_learning_rate"] = cfg.trigger_learning_rate;
  j["train_horizon"] = cfg.train_horizon;
  return j.dump(2);
}

namespace {

// Shared state-cost diagonal over (temp, co2) features.
Eigen::MatrixXd state_cost(const RunConfig& cfg, double scale) {
  Eigen::VectorXd d(8);
  d << 1, 1, 1, 1, cfg.co2_state_weight, cfg.co2_state_weight,
      cfg.co2_state_weight, cfg.co2_state_weight;
  return (scale * d).asDiagonal();
}

}  // namespace

ctrl::GrhdpConfig controller_config(const RunConfig& cfg) {
  ctrl::GrhdpConfig gc;
  gc.D = state_cost(cfg, 1.0);
  gc.M = cfg.control_weight * Eigen::MatrixXd::Identity(4, 4);
  gc.epochs = cfg.controller_epochs;
  gc.hidden = cfg.controller_hidden;
  gc.episode_len = cfg.train_horizon;
  gc.seed = util::Rng(cfg.seed).derive("controller").next_u64();
  return gc;
}

trigger::TriggerConfig trigger_config(const RunConfig& cfg) {
  trigger::TriggerConfig tc;
  tc.beta = cfg.beta;
  tc.t_s = cfg.t_s;
  tc.Q = state_cost(cfg, cfg.trigger_cost_scale);
  tc.R = cfg.trigger_cost_scale * cfg.control_weight *
         Eigen::MatrixXd::Identity(4, 4);
  tc.x_r = Eigen::VectorXd::Zero(8);  // the reference is the feature origin
  tc.horizon = cfg.train_horizon;
  tc.hidden = cfg.trigger_hidden;
  tc.learning_rate = cfg.trigger_learning_rate;
  tc.episodes = cfg.trigger_episodes;
  tc.seed = util::Rng(cfg.seed).derive("trigger-train").next_u64();
  return tc;
}

ctrl::ActivationSet activation_set(const RunConfig& cfg) {
  if (cfg.activation == "fitted") return ctrl::ActivationSet::fitted();
  require(cfg.activation == "paper", "activation must be fitted or paper");
  return ctrl::ActivationSet{nn::paper_tanh(), nn::paper_sigmoid()};
}

BuildingPlant make_plant(const RunConfig& cfg, int horizon_steps) {
  auto pc = sim::PlantConfig::standard();
  sim::WeatherTrace weather;
  if (cfg.weather_csv.empty()) {
    weather = sim::synth_weather(cfg.weather_days, cfg.weather_seed,
                                 cfg.weather_mean_c, cfg.weather_amplitude_c,
                                 cfg.weather_noise_c, pc.dt);
  } else {
    require(std::filesystem::exists(cfg.weather_csv),
            "weather file not found: " + cfg.weather_csv);
    weather = sim::load_weather(cfg.weather_csv);
  }
  sim::OccupancySchedule sched;
  if (cfg.occupancy_csv.empty()) {
    sched = sim::OccupancySchedule::standard();
  } else {
    require(std::filesystem::exists(cfg.occupancy_csv),
            "occupancy file not found: " + cfg.occupancy_csv);
    sched = sim::load_occupancy(cfg.occupancy_csv);
  }
  sched.weekend_active = cfg.weekend_active;
  return BuildingPlant(std::move(pc), std::move(sched), std::move(weather),
                       horizon_steps);
}

ctrl::TrainResult train_building_controller(const RunConfig& cfg) {
  cfg.validate();
  auto plant = make_plant(cfg, cfg.train_horizon);
  auto gc = controller_config(cfg);
  auto acts = activation_set(cfg);
  return ctrl::train_controller(plant, gc, acts);
}

trigger::TriggerTrainResult train_building_trigger(const RunConfig& cfg) {
  cfg.validate();
  require(std::filesystem::exists(cfg.controller_checkpoint),
          "controller checkpoint not found: " + cfg.controller_checkpoint);
  auto cw = ctrl::load_weights(cfg.controller_checkpoint);
  auto plant = make_plant(cfg, cfg.train_horizon);
  require(cw.n() == plant.state_dim() && cw.m() == plant.control_dim(),
          "controller checkpoint does not fit the four-room plant: " +
              cfg.controller_checkpoint);
  auto acts = activation_set(cfg);
  auto tc = trigger_config(cfg);
  return trigger::reinforce_train(cw, acts, plant, tc);
}

void EpisodeMetrics::validate(int t_s) const {
  require(t_s >= 1, "t_s must be at least 1");
  for (double pct : {temp_violation_pct, co2_violation_pct})
    require(pct >= 0.0 && pct <= 100.0, "violation percentages must lie in [0, 100]");
  require(max_temp_dev_c >= 0.0 && max_co2_dev_ppm >= 0.0,
          "deviations must be nonnegative");
  require(comm_rate >= 1.0 / (t_s + 1) - 1e-12 && comm_rate <= 1.0 + 1e-12,
          "comm_rate must lie in [1/(t_s+1), 1]");
  require(std::isfinite(wall_s_per_step) && wall_s_per_step >= 0.0,
          "wall time must be nonnegative");
}

EpisodeMetrics compute_metrics(const Trajectory& traj, double beta, int t_s,
                               double wall_s_per_step) {
  require(!traj.steps.empty(), "cannot score an empty trajectory");
  EpisodeMetrics m;
  m.beta = beta;
  m.wall_s_per_step = wall_s_per_step;
  int temp_bad = 0, co2_bad = 0, triggers = 0;
  for (const auto& st : traj.steps) {
    require(st.temps.size() == st.co2.size() && st.temps.size() > 0,
            "trajectory step has inconsistent room counts");
    bool t_viol = false, c_viol = false;
    for (Eigen::Index i = 0; i < st.temps.size(); ++i) {
      const double t = st.temps(i);
      const double c = st.co2(i);
      t_viol = t_viol || t < kTempLo || t > kTempHi;
      c_viol = c_viol || c > kCo2Limit;
      m.max_temp_dev_c =
          std::max({m.max_temp_dev_c, kTempLo - t, t - kTempHi});
      m.max_co2_dev_ppm = std::max(m.max_co2_dev_ppm, c - kCo2Limit);
    }
    temp_bad += t_viol;
    co2_bad += c_viol;
    triggers += st.a;
    m.bytes_up += st.bytes_up;
    m.bytes_down += st.bytes_down;
  }
  const double h = static_cast<double>(traj.steps.size());
  m.temp_violation_pct = 100.0 * temp_bad / h;
  m.co2_violation_pct = 100.0 * co2_bad / h;
  m.comm_rate = triggers / h;
  m.validate(t_s);
  return m;
}

void write_trajectory(const std::filesystem::path& path, const Trajectory& t) {
  require(!t.steps.empty(), "cannot write an empty trajectory");
  auto out = open_out(path);
  out << kTrajectoryHeader << '\n';
  for (const auto& st : t.steps) {
    require(st.temps.size() == 4 && st.co2.size() == 4 && st.u.size() == 4 &&
                st.occupants.size() == 4,
            "trajectory rows are fixed at four rooms");
    out << st.k << ',' << st.a;
    for (int i = 0; i < 4; ++i) out << ',' << fmt(st.temps(i));
    for (int i = 0; i < 4; ++i) out << ',' << fmt(st.co2(i));
    for (int i = 0; i < 4; ++i) out << ',' << fmt(st.u(i));
    out << ',' << fmt(st.ambient_c);
    for (int i = 0; i < 4; ++i) out << ',' << fmt(st.occupants(i));
    out << ',' << st.bytes_up << ',' << st.bytes_down << '\n';
  }
  if (!out) throw SerializationError("failed writing " + path.string());
}

Trajectory read_trajectory(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SerializationError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kTrajectoryHeader)
    throw SerializationError("unexpected trajectory header in " +
                             path.string());
  Trajectory t;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    const std::string where =
        "at line " + std::to_string(line_no) + " of " + path.string();
    if (cells.size() != 21)
      throw SerializationError("expected 21 columns " + where);
    StepTrace st;
    st.k = static_cast<int>(parse_u64_or_throw(cells[0], where));
    st.a = static_cast<int>(parse_u64_or_throw(cells[1], where));
    if (st.a != 0 && st.a != 1)
      throw SerializationError("trigger column must be 0 or 1 " + where);
    st.temps.resize(4);
    st.co2.resize(4);
    st.u.resize(4);
    st.occupants.resize(4);
    for (int i = 0; i < 4; ++i)
      st.temps(i) = parse_double_or_throw(cells[static_cast<size_t>(2 + i)], where);
    for (int i = 0; i < 4; ++i)
      st.co2(i) = parse_double_or_throw(cells[static_cast<size_t>(6 + i)], where);
    for (int i = 0; i < 4; ++i)
      st.u(i) = parse_double_or_throw(cells[static_cast<size_t>(10 + i)], where);
    st.ambient_c = parse_double_or_throw(cells[14], where);
    for (int i = 0; i < 4; ++i)
      st.occupants(i) = parse_double_or_throw(cells[static_cast<size_t>(15 + i)], where);
    st.bytes_up = parse_u64_or_throw(cells[19], where);
    st.bytes_down = parse_u64_or_throw(cells[20], where);
    t.steps.push_back(std::move(st));
  }
  if (t.steps.empty())
    throw SerializationError("trajectory " + path.string() + " has no rows");
  return t;
}

void write_metrics_csv(const std::filesystem::path& path,
                       std::span<const EpisodeMetrics> rows) {
  auto out = open_out(path);
  out << kMetricsHeader << '\n';
  for (const auto& m : rows) {
    out << fmt(m.beta) << ',' << fmt(m.comm_rate) << ','
        << fmt(m.temp_violation_pct) << ',' << fmt(m.co2_violation_pct) << ','
        << fmt(m.max_temp_dev_c) << ',' << fmt(m.max_co2_dev_ppm) << ','
        << m.bytes_up << ',' << m.bytes_down << ',' << fmt(m.wall_s_per_step)
        << '\n';
  }
  if (!out) throw SerializationError("failed writing " + path.string());
}

std::vector<EpisodeMetrics> read_metrics_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SerializationError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kMetricsHeader)
    throw SerializationError("unexpected metrics header in " + path.string());
  std::vector<EpisodeMetrics> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    const std::string where =
        "at line " + std::to_string(line_no) + " of " + path.string();
    if (cells.size() != 9)
      throw SerializationError("expected 9 columns " + where);
    EpisodeMetrics m;
    m.beta = parse_double_or_throw(cells[0], where);
    m.comm_rate = parse_double_or_throw(cells[1], where);
    m.temp_violation_pct = parse_double_or_throw(cells[2], where);
    m.co2_violation_pct = parse_double_or_throw(cells[3], where);
    m.max_temp_dev_c = parse_double_or_throw(cells[4], where);
    m.max_co2_dev_ppm = parse_double_or_throw(cells[5], where);
    m.bytes_up = parse_u64_or_throw(cells[6], where);
    m.bytes_down = parse_u64_or_throw(cells[7], where);
    m.wall_s_per_step = parse_double_or_throw(cells[8], where);
    rows.push_back(m);
  }
  return rows;
}

double spearman(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), "rank correlation needs equal lengths");
  require(a.size() >= 2, "rank correlation needs at least two points");
  auto ranks = [](std::span<const double> v) {
    const size_t n = v.size();
    std::vector<size_t> idx(n);
    std::iota(idx.begin(), idx.end(), size_t{0});
    std::sort(idx.begin(), idx.end(),
              [&](size_t i, size_t j) { return v[i] < v[j]; });
    std::vector<double> r(n, 0.0);
    size_t i = 0;
    while (i < n) {
      size_t j = i;
      while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
      const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
      for (size_t k = i; k <= j; ++k) r[idx[k]] = avg;  // average rank on ties
      i = j + 1;
    }
    return r;
  };
  const auto ra = ranks(a);
  const auto rb = ranks(b);
  const double n = static_cast<double>(a.size());
  const double mean = (n + 1.0) / 2.0;
  double cov = 0.0, va = 0.0, vb = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    cov += (ra[i] - mean) * (rb[i] - mean);
    va += (ra[i] - mean) * (ra[i] - mean);
    vb += (rb[i] - mean) * (rb[i] - mean);
  }
  if (va == 0.0 || vb == 0.0) return 0.0;  // a constant column has no ranking
  return cov / std::sqrt(va * vb);
}

void write_manifest(const std::filesystem::path& path, const RunConfig& cfg,
                    const std::string& op) {
  const std::string canon = run_config_json(cfg);
  char hash[32];
  std::snprintf(hash, sizeof(hash), "fnv1a64:%016llx",
                static_cast<unsigned long long>(util::fnv1a64(canon)));
  json j;
  j["version"] = kVersion;
  j["op"] = op;
  j["seed"] = cfg.seed;
  j["config_hash"] = hash;
  j["config"] = json::parse(canon);
  auto out = open_out(path);
  out << j.dump(2) << '\n';
  if (!out) throw SerializationError("failed writing " + path.string());
}

}  // namespace enchvac::harness
