// Copyright 2026 The enchvac Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Closed-loop episode runner, beta sweep and timing bench.
#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

#include "enchvac/harness/harness.hpp"
#include "enchvac/nn/enc_nn.hpp"
#include "enchvac/util/rng.hpp"

namespace enchvac::harness {
namespace {

using he::SerializationError;

void require(bool cond, const std::string& msg) {
  if (!cond) throw InvalidParams(msg);
}

// Everything a closed loop needs beyond the plant: frozen weights, the
// evaluation mode, keys when encrypted, and the per-exchange payload sizes.
// Payload sizes are level-determined constants of (preset, backend, dims),
// so probing them once on dummy data is exact for every later exchange.
struct Resolved {
  ctrl::ControllerWeights cw;
  ctrl::ActivationSet acts;
  trigger::TriggerPolicyWeights tw;  // valid only when event
  bool event = false;
  ctrl::EvalMode mode = ctrl::EvalMode::plain_poly;
  he::KeySet keys;  // valid only when encrypted
  uint64_t per_up = 0, per_down = 0;
};

Resolved resolve(const RunConfig& cfg) {
  cfg.validate();
  Resolved r;
  require(std::filesystem::exists(cfg.controller_checkpoint),
          "controller checkpoint not found: " + cfg.controller_checkpoint);
  r.cw = ctrl::load_weights(cfg.controller_checkpoint);
  require(r.cw.n() == 8 && r.cw.m() == 4,
          "controller checkpoint does not fit the four-room plant: " +
              cfg.controller_checkpoint);
  r.acts = activation_set(cfg);
  r.event = cfg.trigger == "event";
  if (r.event) {
    require(std::filesystem::exists(cfg.trigger_checkpoint),
            "trigger checkpoint not found: " + cfg.trigger_checkpoint);
    r.tw = trigger::load_trigger_policy(cfg.trigger_checkpoint);
    require(r.tw.n() == r.cw.n(),
            "trigger checkpoint does not fit the controller state: " +
                cfg.trigger_checkpoint);
  }
  if (cfg.backend == "plain") {
    r.mode = ctrl::EvalMode::plain_poly;
    r.per_up = 8 * sizeof(double);
    r.per_down = 4 * sizeof(double);
    return r;
  }
  r.mode = ctrl::EvalMode::encrypted;
  auto params = he::HeParams::preset(cfg.he_preset);
  auto ctx = he::make_context(params, he::backend_from_string(cfg.backend));
  r.keys = he::keygen(ctx, util::Rng(cfg.seed).derive("keys").next_u64());
  auto pm1 = nn::pack_diagonals(r.cw.Wa1);
  auto pm2 = nn::pack_diagonals(r.cw.Wa2);
  const std::vector<double> zeros(static_cast<size_t>(r.cw.n()), 0.0);
  auto up = he::encrypt(zeros, pm1.dim, r.keys);
  require(up.level() >= 5, "preset '" + cfg.he_preset +
                               "' is too shallow for the controller forward; "
                               "it needs 5 levels");
  const std::vector<double> gain(static_cast<size_t>(r.cw.m()), 1.0);
  auto down = nn::enc_two_layer_forward(pm1, pm2, r.acts.tanh_poly, up, gain,
                                        r.keys);
  r.per_up = he::serialize(up).size();
  r.per_down = he::serialize(down).size();
  return r;
}

}  // namespace

LoopResult run_closed_loop(const RunConfig& cfg) {
  auto r = resolve(cfg);
  auto plant = make_plant(cfg, cfg.horizon);
  util::Rng root(cfg.seed);
  Eigen::VectorXd x = plant.reset(root.derive("plant").next_u64());
  util::Rng trig_rng = root.derive("trigger");
  const auto tc = trigger_config(cfg);
  auto s = trigger::initial_info_state(x, plant.control_dim(), cfg.t_s);
  const he::KeySet* keys = r.mode == ctrl::EvalMode::encrypted ? &r.keys : nullptr;

  LoopResult out;
  out.traj.steps.reserve(static_cast<size_t>(cfg.horizon));
  const auto t_begin = std::chrono::steady_clock::now();
  for (int k = 0; k < cfg.horizon; ++k) {
    StepTrace st;
    st.k = k;
    st.temps = plant.raw().temps;
    st.co2 = plant.raw().co2;
    st.ambient_c = plant.ambient();
    st.occupants = plant.occupants();
    st.a = r.event ? trigger::policy_action(s, r.tw, tc, trig_rng).a : 1;
    if (st.a == 1) {
      s.u_star = ctrl::actor_forward(x, r.cw, r.mode, r.acts, keys);
      st.bytes_up = r.per_up;
      st.bytes_down = r.per_down;
    }
    st.u = s.u_star;  // zero-order hold between communications
    x = plant.step(st.u);
    s = trigger::info_update(s, st.a, x);
    out.traj.steps.push_back(std::move(st));
  }
  const std::chrono::duration<double> elapsed =
      std::chrono::steady_clock::now() - t_begin;
  out.metrics = compute_metrics(out.traj, cfg.beta, cfg.t_s,
                                elapsed.count() / cfg.horizon);
  out.metrics.validate(cfg.t_s);
  return out;
}

SweepResult sweep_beta(std::span<const double> grid, const RunConfig& base,
                       const std::filesystem::path& out_dir) {
  require(grid.size() >= 2, "a sweep needs at least two beta values");
  base.validate();
  require(std::filesystem::exists(base.controller_checkpoint),
          "controller checkpoint not found: " + base.controller_checkpoint);
  std::filesystem::create_directories(out_dir);

  std::vector<SweepPoint> points(grid.size());
  std::atomic<size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first_error;
  std::mutex error_mu;

  auto work = [&]() {
    for (;;) {
      const size_t i = next.fetch_add(1);
      if (i >= grid.size() || failed.load()) return;
      try {
        RunConfig cfg = base;
        cfg.beta = grid[i];
        cfg.trigger = "event";
        cfg.seed = util::Rng(base.seed).derive("sweep", i).next_u64();
        const auto dir = out_dir / ("beta_" + std::to_string(i));
        std::filesystem::create_directories(dir);

        auto trained = train_building_trigger(cfg);
        trigger::save_trigger_policy(dir / "trigger.bin", trained.weights);
        trigger::write_trigger_log(dir / "train_log.csv", trained.log);

        cfg.trigger_checkpoint = (dir / "trigger.bin").string();
        auto lr = run_closed_loop(cfg);
        write_trajectory(dir / "trajectory.csv", lr.traj);
        write_metrics_csv(dir / "metrics.csv", {{lr.metrics}});
        points[i] = SweepPoint{grid[i], lr.metrics};
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mu);
        if (!first_error) first_error = std::current_exception();
        failed.store(true);
        return;
      }
    }
  };

  const size_t workers = std::min<size_t>(
      grid.size(), std::max(1u, std::thread::hardware_concurrency()));
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (size_t t = 0; t < workers; ++t) pool.emplace_back(work);
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);

  SweepResult res;
  res.points = std::move(points);
  std::vector<EpisodeMetrics> rows;
  std::vector<double> betas, rates;
  for (const auto& p : res.points) {
    rows.push_back(p.metrics);
    betas.push_back(p.beta);
    rates.push_back(p.metrics.comm_rate);
  }
  write_metrics_csv(out_dir / "sweep.csv", rows);
  res.spearman_beta_rate = spearman(betas, rates);
  return res;
}

namespace {

double median_seconds(const std::function<void()>& fn, int iterations) {
  fn();  // warmup
  std::vector<double> samples;
  samples.reserve(static_cast<size_t>(iterations));
  for (int i = 0; i < iterations; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const std::chrono::duration<double> dt =
        std::chrono::steady_clock::now() - t0;
    samples.push_back(dt.count());
  }
  std::sort(samples.begin(), samples.end());
  const size_t n = samples.size();
  return n % 2 ? samples[n / 2] : 0.5 * (samples[n / 2 - 1] + samples[n / 2]);
}

}  // namespace

std::vector<BenchRow> bench_timing(const RunConfig& cfg, int iterations) {
  cfg.validate();
  require(iterations >= 1, "bench needs at least one iteration");

  // Self-contained weights: bench timings depend on dims and parameters,
  // not on trained values, so no checkpoint is needed.
  const Eigen::VectorXd u_max = Eigen::VectorXd::Constant(4, 0.5);
  auto cw = ctrl::init_weights(8, 4, 16, u_max, cfg.seed);
  auto acts = activation_set(cfg);
  util::Rng rng = util::Rng(cfg.seed).derive("bench");
  Eigen::VectorXd x(8);
  for (int i = 0; i < 8; ++i) x(i) = 2.0 * rng.next_double() - 1.0;

  std::vector<BenchRow> rows;
  auto add = [&](const std::string& name, const std::function<void()>& fn) {
    rows.push_back(BenchRow{name, median_seconds(fn, iterations), iterations});
  };

  add("actor_forward_plain",
      [&] { ctrl::actor_forward(x, cw, ctrl::EvalMode::plain, acts); });
  add("actor_forward_poly",
      [&] { ctrl::actor_forward(x, cw, ctrl::EvalMode::plain_poly, acts); });

  const auto deep = he::HeParams::preset("deep-6");
  for (auto kind : {he::BackendKind::reference, he::BackendKind::rlwe}) {
    auto ctx = he::make_context(deep, kind);
    auto keys = he::keygen(ctx, util::Rng(cfg.seed).derive("keys").next_u64());
    const std::string suffix = std::string("_deep6_") + he::to_string(kind);
    add("actor_forward" + suffix, [&] {
      ctrl::actor_forward(x, cw, ctrl::EvalMode::encrypted, acts, &keys);
    });
    if (kind == he::BackendKind::rlwe) {
      auto pm1 = nn::pack_diagonals(cw.Wa1);
      auto ct = he::encrypt(std::vector<double>(8, 0.25), pm1.dim, keys);
      auto bytes = he::serialize(ct);
      add("exchange_serialize" + suffix, [&] { he::serialize(ct); });
      add("exchange_deserialize" + suffix,
          [&] { he::deserialize(ctx, bytes); });
    }
  }

  // Depth-limited kernels on the published shallow parameters: one matvec
  // (1 level) and one polynomial activation (3 levels) fit its budget; the
  // full 5-level forward does not and is not timed here.
  const auto shallow = he::HeParams::preset("paper-2024");
  auto sctx = he::make_context(shallow, he::BackendKind::rlwe);
  auto skeys = he::keygen(sctx, util::Rng(cfg.seed).derive("keys").next_u64());
  auto pm1 = nn::pack_diagonals(cw.Wa1);
  auto sct = he::encrypt(std::vector<double>(8, 0.25), pm1.dim, skeys);
  add("enc_matvec_paper2024_rlwe",
      [&] { nn::diag_matvec(pm1, sct, skeys); });
  add("enc_activation_paper2024_rlwe",
      [&] { nn::poly_activation(sct, acts.tanh_poly, skeys); });
  return rows;
}

void write_bench_csv(const std::filesystem::path& path,
                     std::span<const BenchRow> rows) {
  if (path.has_parent_path())
    std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out)
    throw SerializationError("cannot open " + path.string() + " for writing");
  out << "name,median_s,iterations\n";
  for (const auto& r : rows) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", r.median_s);
    out << r.name << ',' << buf << ',' << r.iterations << '\n';
  }
  if (!out) throw SerializationError("failed writing " + path.string());
}

}  // namespace enchvac::harness
