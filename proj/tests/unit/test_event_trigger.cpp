// Copyright 2026 The enchvac Authors.
// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "enchvac/ctrl/grhdp.hpp"
#include "enchvac/trigger/event_trigger.hpp"
#include "enchvac/util/rng.hpp"

using namespace enchvac;
using namespace enchvac::trigger;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<long>(v.size()));
  long i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

Eigen::VectorXd rand_vec(util::Rng& rng, int n, double range) {
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v(i) = (rng.next_double() * 2.0 - 1.0) * range;
  return v;
}

Eigen::MatrixXd rand_pd(util::Rng& rng, int n) {
  Eigen::MatrixXd a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = rng.next_double() * 2.0 - 1.0;
  return a.transpose() * a + 0.1 * Eigen::MatrixXd::Identity(n, n);
}

// Elementwise loop evaluation of v'Av, kept free of Eigen reductions.
double quad_loop(const Eigen::VectorXd& v, const Eigen::MatrixXd& A) {
  double s = 0.0;
  for (int i = 0; i < v.size(); ++i)
    for (int j = 0; j < v.size(); ++j) s += v(i) * A(i, j) * v(j);
  return s;
}

TriggerConfig base_cfg(int n, int m) {
  TriggerConfig cfg;
  cfg.Q = Eigen::MatrixXd::Identity(n, n);
  cfg.R = Eigen::MatrixXd::Identity(m, m);
  cfg.x_r = Eigen::VectorXd::Zero(n);
  return cfg;
}

// Two enumerated plant states: staying regulated needs fresh communication
// (weak control drifts up and cannot recover, strong control recovers but
// overshoots at the reference), so triggering trades deviation against beta.
DiscreteInstance two_state_instance(const ctrl::ControllerWeights& cw,
                                    const ctrl::ActivationSet& acts) {
  DiscreteInstance inst;
  inst.states = {vec({0.0}), vec({1.0})};
  Eigen::MatrixXd t0(2, 2), t1(2, 2);
  t0 << 0.15, 0.85, 0.05, 0.95;
  t1 << 0.30, 0.70, 0.90, 0.10;
  inst.trans = {t0, t1};
  inst.initial = 1;
  for (const auto& s : inst.states)
    inst.controls.push_back(
        ctrl::actor_forward(s, cw, ctrl::EvalMode::plain_poly, acts));
  return inst;
}

// Three states where fresh control always moves the plant (so a trigger is
// never a no-op) and any stale control slides toward the expensive state s2:
// with free communication, triggering is strictly better almost everywhere.
DiscreteInstance three_state_instance(const ctrl::ControllerWeights& cw,
                                      const ctrl::ActivationSet& acts) {
  DiscreteInstance inst;
  inst.states = {vec({0.0}), vec({1.0}), vec({2.0})};
  Eigen::MatrixXd t0(3, 3), t1(3, 3), t2(3, 3);
  t0 << 0.00, 1.00, 0.00, 0.05, 0.05, 0.90, 0.00, 0.10, 0.90;
  t1 << 0.05, 0.05, 0.90, 0.95, 0.00, 0.05, 0.05, 0.15, 0.80;
  t2 << 0.00, 0.20, 0.80, 0.10, 0.10, 0.80, 0.90, 0.05, 0.05;
  inst.trans = {t0, t1, t2};
  inst.initial = 1;
  for (const auto& s : inst.states)
    inst.controls.push_back(
        ctrl::actor_forward(s, cw, ctrl::EvalMode::plain_poly, acts));
  return inst;
}

TriggerConfig tiny_cfg(double beta) {
  TriggerConfig cfg = base_cfg(1, 1);
  cfg.beta = beta;
  cfg.t_s = 3;
  cfg.R = 0.01 * Eigen::MatrixXd::Identity(1, 1);
  cfg.horizon = 6;
  cfg.hidden = 8;
  cfg.learning_rate = 0.05;
  cfg.episodes = 2000;
  cfg.seed = 1;
  return cfg;
}

// Exact expected cost of a fixed decision rule on a discrete instance, by
// propagating the distribution over augmented states forward. Independent of
// the library's backward recursion; the rule sees (k, x, z, N) and forced
// decisions override it.
template <typename Rule>
double forward_sweep_cost(const DiscreteInstance& inst, const TriggerConfig& cfg,
                          Rule rule) {
  const int S = static_cast<int>(inst.states.size()), T = cfg.t_s;
  auto idx = [&](int x, int z, int N) { return (x * S + z) * (T + 1) + N; };
  std::vector<double> dev(S), rc(S), term(S);
  for (int i = 0; i < S; ++i) {
    dev[i] = quad_loop(inst.states[i] - cfg.x_r, cfg.Q);
    rc[i] = quad_loop(inst.controls[i], cfg.R);
    term[i] = dev[i];
  }
  std::vector<double> mass(static_cast<size_t>(S) * S * (T + 1), 0.0);
  mass[idx(inst.initial, inst.initial, T)] = 1.0;
  double total = 0.0;
  for (int k = 0; k < cfg.horizon; ++k) {
    std::vector<double> next(mass.size(), 0.0);
    for (int x = 0; x < S; ++x)
      for (int z = 0; z < S; ++z)
        for (int N = 0; N <= T; ++N) {
          double m = mass[idx(x, z, N)];
          if (m == 0.0) continue;
          int a = N >= T ? 1 : rule(k, x, z, N);
          if (a) {
            total += m * (dev[x] + rc[x] + cfg.beta);
            for (int xn = 0; xn < S; ++xn)
              next[idx(xn, x, 0)] += m * inst.trans[x](x, xn);
          } else {
            total += m * (dev[x] + rc[z]);
            for (int xn = 0; xn < S; ++xn)
              next[idx(xn, z, N + 1)] += m * inst.trans[z](x, xn);
          }
        }
    mass.swap(next);
  }
  for (int x = 0; x < S; ++x)
    for (int z = 0; z < S; ++z)
      for (int N = 0; N <= T; ++N) total += mass[idx(x, z, N)] * term[x];
  return total;
}

struct Setup {
  ctrl::ActivationSet acts = ctrl::ActivationSet::fitted();
  ctrl::ControllerWeights cw = ctrl::init_weights(1, 1, 4, vec({1.0}), 2);
};

}  // namespace

TEST_CASE("value recursion on a one-state instance matches the closed form") {
  Setup su;
  DiscreteInstance inst;
  inst.states = {vec({0.7})};
  inst.controls = {
      ctrl::actor_forward(inst.states[0], su.cw, ctrl::EvalMode::plain_poly, su.acts)};
  inst.trans = {Eigen::MatrixXd::Ones(1, 1)};
  inst.initial = 0;
  TriggerConfig cfg = tiny_cfg(0.8);

  // One state means every decision sees the same deviation and control cost;
  // the only freedom is how often beta is paid, so the optimum triggers only
  // when forced: at k = 0 and then every T_s + 1 steps.
  double dev = 0.7 * 0.7, rc = 0.01 * inst.controls[0](0) * inst.controls[0](0);
  int forced = 0;
  for (int k = 0, N = cfg.t_s; k < cfg.horizon; ++k) {
    if (N >= cfg.t_s) {
      ++forced;
      N = 0;
    } else {
      ++N;
    }
  }
  double closed = cfg.horizon * (dev + rc) + forced * cfg.beta + dev;

  auto dp = value_recursion_oracle(inst, cfg);
  CHECK(dp.optimal_cost == doctest::Approx(closed).epsilon(1e-12));
  CHECK(forced == 2);
}

TEST_CASE("value recursion at horizon one equals direct enumeration") {
  Setup su;
  auto inst = two_state_instance(su.cw, su.acts);
  TriggerConfig cfg = tiny_cfg(0.5);
  cfg.horizon = 1;
  auto dp = value_recursion_oracle(inst, cfg);

  const int S = 2, T = cfg.t_s;
  for (int x = 0; x < S; ++x)
    for (int z = 0; z < S; ++z)
      for (int N = 0; N <= T; ++N) {
        double dev = quad_loop(inst.states[x] - cfg.x_r, cfg.Q);
        double q1 = dev + quad_loop(inst.controls[x], cfg.R) + cfg.beta;
        for (int xn = 0; xn < S; ++xn)
          q1 += inst.trans[x](x, xn) * quad_loop(inst.states[xn] - cfg.x_r, cfg.Q);
        double best = q1;
        if (N < T) {
          double q0 = dev + quad_loop(inst.controls[z], cfg.R);
          for (int xn = 0; xn < S; ++xn)
            q0 += inst.trans[z](x, xn) * quad_loop(inst.states[xn] - cfg.x_r, cfg.Q);
          best = std::min(best, q0);
        }
        CHECK(dp.value(0, x, z, N) == doctest::Approx(best).epsilon(1e-12));
      }
}

TEST_CASE("greedy rollout of the recursion's action table attains its value") {
  Setup su;
  for (double beta : {0.0, 0.5, 3.0}) {
    auto inst = two_state_instance(su.cw, su.acts);
    TriggerConfig cfg = tiny_cfg(beta);
    auto dp = value_recursion_oracle(inst, cfg);
    double rolled = forward_sweep_cost(
        inst, cfg, [&](int k, int x, int z, int N) { return dp.action(k, x, z, N); });
    CHECK(rolled == doctest::Approx(dp.optimal_cost).epsilon(1e-12));
  }
}

TEST_CASE("no stationary policy beats the recursion's value") {
  Setup su;
  auto inst = two_state_instance(su.cw, su.acts);
  TriggerConfig cfg = tiny_cfg(0.5);
  auto dp = value_recursion_oracle(inst, cfg);
  util::Rng rng(11);
  for (int trial = 0; trial < 60; ++trial) {
    std::vector<int> table(2 * 2 * (cfg.t_s + 1));
    for (auto& a : table) a = static_cast<int>(rng.next_below(2));
    double cost = forward_sweep_cost(inst, cfg, [&](int, int x, int z, int N) {
      return table[(x * 2 + z) * (cfg.t_s + 1) + N];
    });
    CHECK(cost >= dp.optimal_cost - 1e-9);
  }
}

TEST_CASE("instance validation rejects malformed tables") {
  Setup su;
  auto inst = two_state_instance(su.cw, su.acts);
  TriggerConfig cfg = tiny_cfg(0.5);
  auto bad = inst;
  bad.trans[0](0, 0) += 0.1;
  CHECK_THROWS_AS(value_recursion_oracle(bad, cfg), InvalidParams);
  bad = inst;
  bad.trans.pop_back();
  CHECK_THROWS_AS(bad.validate(cfg), InvalidParams);
  bad = inst;
  bad.initial = 5;
  CHECK_THROWS_AS(bad.validate(cfg), InvalidParams);

  // 12 states at t_s = 99 would enumerate 12 * 12 * 100 > 1e4 members.
  DiscreteInstance big;
  TriggerConfig big_cfg = base_cfg(1, 1);
  big_cfg.t_s = 99;
  for (int i = 0; i < 12; ++i) {
    big.states.push_back(vec({static_cast<double>(i)}));
    big.controls.push_back(vec({0.1}));
    big.trans.push_back(Eigen::MatrixXd::Identity(12, 12));
  }
  CHECK_THROWS_AS(big.validate(big_cfg), InvalidParams);
}

TEST_CASE("info update follows the skip and trigger rules") {
  AugmentedInfoState s;
  s.x = vec({23.0});
  s.z = vec({25.0});
  s.N = 4;
  s.u_star = vec({0.3});

  auto trig = info_update(s, 1, vec({22.0}));
  CHECK(trig.z(0) == 23.0);
  CHECK(trig.N == 0);
  CHECK(trig.x(0) == 22.0);
  CHECK(trig.u_star(0) == 0.3);

  auto skip = info_update(s, 0, vec({22.0}));
  CHECK(skip.z(0) == 25.0);
  CHECK(skip.N == 5);
  CHECK(skip.x(0) == 22.0);

  CHECK_THROWS_AS(info_update(s, 2, vec({22.0})), InvalidParams);
  CHECK_THROWS_AS(info_update(s, 0, vec({22.0, 1.0})), InvalidParams);
}

TEST_CASE("stage cost charges the replayed or fresh control plus the penalty") {
  TriggerConfig cfg = base_cfg(2, 1);
  cfg.beta = 5.0;
  AugmentedInfoState s;
  s.x = vec({1.0, 0.0});
  s.z = vec({0.0, 0.0});
  s.N = 1;
  s.u_star = vec({2.0});

  CHECK(stage_cost(s, 0, vec({9.0}), cfg) == doctest::Approx(5.0).epsilon(1e-15));
  CHECK(stage_cost(s, 1, vec({1.0}), cfg) == doctest::Approx(7.0).epsilon(1e-15));

  AugmentedInfoState at_ref;
  at_ref.x = vec({0.0, 0.0});
  at_ref.z = at_ref.x;
  at_ref.u_star = vec({0.0});
  CHECK(stage_cost(at_ref, 1, vec({0.0}), cfg) == doctest::Approx(cfg.beta));

  CHECK_THROWS_AS(stage_cost(s, 1, vec({1.0, 2.0}), cfg), InvalidParams);
  CHECK_THROWS_AS(stage_cost(s, 2, vec({1.0}), cfg), InvalidParams);
  AugmentedInfoState short_x = s;
  short_x.x = vec({1.0});
  CHECK_THROWS_AS(stage_cost(short_x, 0, vec({1.0}), cfg), InvalidParams);
}

TEST_CASE("stage and terminal costs match a loop-evaluated quadratic form") {
  util::Rng rng(5);
  for (int trial = 0; trial < 25; ++trial) {
    int n = 1 + static_cast<int>(rng.next_below(4));
    int m = 1 + static_cast<int>(rng.next_below(3));
    TriggerConfig cfg = base_cfg(n, m);
    cfg.Q = rand_pd(rng, n);
    cfg.R = rand_pd(rng, m);
    cfg.x_r = rand_vec(rng, n, 2.0);
    cfg.beta = rng.next_double() * 4.0;
    AugmentedInfoState s;
    s.x = rand_vec(rng, n, 3.0);
    s.z = rand_vec(rng, n, 3.0);
    s.N = static_cast<int>(rng.next_below(5));
    s.u_star = rand_vec(rng, m, 2.0);
    Eigen::VectorXd u = rand_vec(rng, m, 2.0);

    double dev = quad_loop(s.x - cfg.x_r, cfg.Q);
    CHECK(stage_cost(s, 0, u, cfg) ==
          doctest::Approx(dev + quad_loop(s.u_star, cfg.R)).epsilon(1e-12));
    CHECK(stage_cost(s, 1, u, cfg) ==
          doctest::Approx(dev + quad_loop(u, cfg.R) + cfg.beta).epsilon(1e-12));
    CHECK(stage_cost(s, 0, u, cfg) >= 0.0);
    CHECK(terminal_cost(s.x, cfg) == doctest::Approx(dev).epsilon(1e-12));
  }
  TriggerConfig cfg = base_cfg(1, 1);
  CHECK(terminal_cost(vec({0.0}), cfg) == 0.0);
  CHECK(terminal_cost(vec({3.0}), cfg) == doctest::Approx(9.0).epsilon(1e-15));
}

TEST_CASE("config validation rejects bad parameters") {
  TriggerConfig cfg = base_cfg(2, 1);
  CHECK_NOTHROW(cfg.validate(2, 1));
  auto bad = cfg;
  bad.beta = -0.1;
  CHECK_THROWS_AS(bad.validate(2, 1), InvalidParams);
  bad = cfg;
  bad.t_s = 0;
  CHECK_THROWS_AS(bad.validate(2, 1), InvalidParams);
  bad = cfg;
  bad.horizon = 0;
  CHECK_THROWS_AS(bad.validate(2, 1), InvalidParams);
  bad = cfg;
  bad.learning_rate = 0.0;
  CHECK_THROWS_AS(bad.validate(2, 1), InvalidParams);
  bad = cfg;
  bad.Q(0, 1) = 0.5;  // asymmetric
  CHECK_THROWS_AS(bad.validate(2, 1), InvalidParams);
  bad = cfg;
  bad.Q = -cfg.Q;
  CHECK_THROWS_AS(bad.validate(2, 1), InvalidParams);
  CHECK_THROWS_AS(cfg.validate(3, 1), InvalidParams);
}

TEST_CASE("policy action forces a trigger at the threshold and stays in (0,1)") {
  TriggerConfig cfg = base_cfg(1, 1);
  cfg.t_s = 4;
  auto w = init_trigger_policy(1, 6, 3);
  AugmentedInfoState s;
  s.x = vec({1.0});
  s.z = vec({0.5});
  s.u_star = vec({0.2});

  util::Rng rng(7);
  s.N = cfg.t_s;
  for (int i = 0; i < 50; ++i) {
    auto d = policy_action(s, w, cfg, rng);
    CHECK(d.a == 1);
    CHECK(d.forced);
    CHECK(d.log_prob == 0.0);
  }

  // Saturated logits keep the probability strictly inside (0,1).
  auto hi = w;
  hi.b2 = 1e9;
  s.N = 1;
  double p_hi = trigger_probability(s, hi, cfg);
  CHECK(p_hi < 1.0);
  CHECK(p_hi > 0.999);
  auto lo = w;
  lo.b2 = -1e9;
  double p_lo = trigger_probability(s, lo, cfg);
  CHECK(p_lo > 0.0);
  CHECK(p_lo < 1e-3);

  hi.b2 = 12.0;
  int ones = 0;
  const int kSamples = 10000;
  for (int i = 0; i < kSamples; ++i) ones += policy_action(s, hi, cfg, rng).a;
  CHECK(static_cast<double>(ones) / kSamples >= 0.99);

  // Same stream seed, same decision sequence.
  util::Rng r1(42), r2(42);
  for (int i = 0; i < 200; ++i) {
    auto d1 = policy_action(s, w, cfg, r1);
    auto d2 = policy_action(s, w, cfg, r2);
    CHECK(d1.a == d2.a);
    CHECK(d1.log_prob == d2.log_prob);
  }
}

TEST_CASE("episode mechanics: rates, decomposition, replay, forced gaps") {
  Setup su;
  auto inst = three_state_instance(su.cw, su.acts);
  DiscretePlant plant(inst);
  TriggerConfig cfg = tiny_cfg(0.5);
  cfg.horizon = 30;

  auto always = init_trigger_policy(1, 8, 3);
  always.b2 = 15.0;
  util::Rng r1(100);
  auto ep_always = run_episode(always, su.cw, su.acts, plant, cfg, r1, true);
  CHECK(ep_always.comm_rate == 1.0);
  CHECK(ep_always.triggers == cfg.horizon);

  // The same policy and streams at beta = 0 walk the same trajectory, so the
  // cost difference is exactly beta per step.
  auto cfg0 = cfg;
  cfg0.beta = 0.0;
  util::Rng r1b(100);
  auto ep_free = run_episode(always, su.cw, su.acts, plant, cfg0, r1b, true);
  CHECK(ep_always.total_cost - ep_free.total_cost ==
        doctest::Approx(cfg.beta * cfg.horizon).epsilon(1e-12));

  auto never = init_trigger_policy(1, 8, 3);
  never.b2 = -15.0;
  TriggerConfig cfg5 = tiny_cfg(0.5);
  cfg5.t_s = 5;
  cfg5.horizon = 20;
  util::Rng r2(7);
  auto ep_never = run_episode(never, su.cw, su.acts, plant, cfg5, r2, true);
  CHECK(ep_never.comm_rate == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(ep_never.triggers == 4);

  // Mixed policy: decomposition, replay, gap bound, rate floor.
  auto mixed = init_trigger_policy(1, 8, 9);
  for (uint64_t seed : {1ull, 2ull, 3ull, 4ull}) {
    util::Rng r(seed);
    auto ep = run_episode(mixed, su.cw, su.acts, plant, cfg, r, true);
    REQUIRE(ep.steps.size() == static_cast<size_t>(cfg.horizon));

    double sum = 0.0;
    for (const auto& st : ep.steps) sum += st.cost;
    sum += terminal_cost(ep.x_end, cfg);
    CHECK(sum == doctest::Approx(ep.total_cost).epsilon(1e-9));

    // Replaying the logged decisions through info_update reproduces the
    // logged augmented states.
    AugmentedInfoState s;
    s.x = ep.steps[0].x;
    s.z = ep.steps[0].z;
    s.N = ep.steps[0].N;
    s.u_star = vec({0.0});
    for (size_t k = 0; k + 1 < ep.steps.size(); ++k) {
      s = info_update(s, ep.steps[k].a, ep.steps[k + 1].x);
      CHECK(s.z == ep.steps[k + 1].z);
      CHECK(s.N == ep.steps[k + 1].N);
    }

    CHECK(ep.steps[0].a == 1);  // first decision is the forced bootstrap
    int run = 0, max_run = 0;
    for (const auto& st : ep.steps) {
      run = st.a ? 0 : run + 1;
      max_run = std::max(max_run, run);
      CHECK(st.N <= cfg.t_s);
    }
    CHECK(max_run <= cfg.t_s);
  }

  // At t_s = 3, h = 6 and t_s = 5, h = 20 every policy meets the 1/t_s rate
  // floor: zero-runs are capped at t_s, so at least ceil(h/(t_s+1)) triggers.
  for (auto [ts, h] : {std::pair{3, 6}, std::pair{5, 20}}) {
    TriggerConfig c = tiny_cfg(0.5);
    c.t_s = ts;
    c.horizon = h;
    for (uint64_t seed : {11ull, 12ull, 13ull}) {
      util::Rng r(seed);
      auto ep = run_episode(mixed, su.cw, su.acts, plant, c, r);
      CHECK(ep.comm_rate >= 1.0 / ts - 1e-12);
    }
  }
}

TEST_CASE("plant faults are rethrown with the step index") {
  struct FaultyPlant final : ctrl::PlantInterface {
    int steps = 0;
    Eigen::VectorXd reset(uint64_t) override {
      steps = 0;
      return vec({1.0});
    }
    Eigen::VectorXd step(const Eigen::VectorXd&) override {
      if (++steps == 4) throw std::runtime_error("actuator offline");
      return vec({1.0});
    }
    int state_dim() const override { return 1; }
    int control_dim() const override { return 1; }
    Eigen::VectorXd control_upper_bound() const override { return vec({1.0}); }
  };
  Setup su;
  FaultyPlant plant;
  TriggerConfig cfg = tiny_cfg(0.5);
  cfg.horizon = 10;
  auto w = init_trigger_policy(1, 8, 3);
  util::Rng r(1);
  try {
    run_episode(w, su.cw, su.acts, plant, cfg, r);
    FAIL("expected a plant fault");
  } catch (const InvalidParams& e) {
    CHECK(std::string(e.what()).find("step 3") != std::string::npos);
    CHECK(std::string(e.what()).find("actuator offline") != std::string::npos);
  }
}

TEST_CASE("checkpoint roundtrip preserves the policy bit for bit") {
  auto w = init_trigger_policy(2, 6, 17);
  w.b2 = 0.25;
  w.feat_count = 37.0;
  w.feat_mean = vec({0.1, -0.2, 0.3, 0.0, 1.5});
  w.feat_m2 = vec({1.0, 2.0, 0.5, 0.1, 3.0});
  auto path = std::filesystem::temp_directory_path() / "trigger_policy.bin";
  save_trigger_policy(path, w);
  auto r = load_trigger_policy(path);
  CHECK(r.W1 == w.W1);
  CHECK(r.b1 == w.b1);
  CHECK(r.w2 == w.w2);
  CHECK(r.b2 == w.b2);
  CHECK(r.feat_mean == w.feat_mean);
  CHECK(r.feat_m2 == w.feat_m2);
  CHECK(r.feat_count == w.feat_count);

  auto sz = std::filesystem::file_size(path);
  std::filesystem::resize_file(path, sz - 9);
  CHECK_THROWS_AS(load_trigger_policy(path), he::SerializationError);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  os << "not a policy";
  os.close();
  CHECK_THROWS_AS(load_trigger_policy(path), he::SerializationError);
  std::filesystem::remove(path);
}

TEST_CASE("episode and training logs use the pinned headers") {
  Setup su;
  auto inst = two_state_instance(su.cw, su.acts);
  DiscretePlant plant(inst);
  TriggerConfig cfg = tiny_cfg(0.5);
  auto w = init_trigger_policy(1, 8, 3);
  util::Rng r(1);
  auto ep = run_episode(w, su.cw, su.acts, plant, cfg, r, true);

  auto dir = std::filesystem::temp_directory_path();
  auto ep_path = dir / "trigger_episode.csv";
  write_episode_log(ep_path, ep);
  std::ifstream is(ep_path);
  std::string header;
  std::getline(is, header);
  CHECK(header == "step,a,comm_rate_to_date,stage_cost,x,z,N");
  int lines = 0;
  for (std::string line; std::getline(is, line);) ++lines;
  CHECK(lines == cfg.horizon);
  is.close();
  std::filesystem::remove(ep_path);

  std::vector<TriggerEpisodeLog> log = {{0, 1.5, 0.5}, {1, 1.2, 0.4}};
  auto log_path = dir / "trigger_train.csv";
  write_trigger_log(log_path, log);
  std::ifstream ls(log_path);
  std::getline(ls, header);
  CHECK(header == "episode,cost,comm_rate");
  ls.close();
  std::filesystem::remove(log_path);

  auto un = run_episode(w, su.cw, su.acts, plant, cfg, r);
  CHECK_THROWS_AS(write_episode_log(ep_path, un), InvalidParams);
}

TEST_CASE("reinforce training is deterministic and leaves eval stats frozen") {
  Setup su;
  auto inst = two_state_instance(su.cw, su.acts);
  DiscretePlant plant(inst);
  TriggerConfig cfg = tiny_cfg(0.5);
  cfg.episodes = 200;
  auto a = reinforce_train(su.cw, su.acts, plant, cfg);
  auto b = reinforce_train(su.cw, su.acts, plant, cfg);
  CHECK(a.weights.W1 == b.weights.W1);
  CHECK(a.weights.w2 == b.weights.w2);
  CHECK(a.weights.b2 == b.weights.b2);
  REQUIRE(a.log.size() == 200);
  for (size_t i = 0; i < a.log.size(); ++i) {
    CHECK(a.log[i].cost == b.log[i].cost);
    CHECK(a.log[i].comm_rate == b.log[i].comm_rate);
  }
  CHECK(a.weights.feat_count > 0.0);

  auto snap = a.weights;
  util::Rng r(5);
  (void)run_episode(a.weights, su.cw, su.acts, plant, cfg, r);
  CHECK(a.weights.feat_count == snap.feat_count);
  CHECK(a.weights.feat_mean == snap.feat_mean);
}

TEST_CASE("trained trigger reaches the recursion optimum within 5 percent") {
  Setup su;
  auto inst = two_state_instance(su.cw, su.acts);
  DiscretePlant plant(inst);
  TriggerConfig cfg = tiny_cfg(0.5);
  auto dp = value_recursion_oracle(inst, cfg);
  auto res = reinforce_train(su.cw, su.acts, plant, cfg);

  util::Rng er(999);
  double mean = 0.0;
  const int kEval = 2000;
  for (int i = 0; i < kEval; ++i) {
    auto rng = er.derive("eval", i);
    mean += run_episode(res.weights, su.cw, su.acts, plant, cfg, rng).total_cost;
  }
  mean /= kEval;
  CHECK(mean <= 1.05 * dp.optimal_cost);
}

TEST_CASE("free communication trains to near-constant triggering") {
  Setup su;
  auto inst = three_state_instance(su.cw, su.acts);
  DiscretePlant plant(inst);
  TriggerConfig cfg = tiny_cfg(0.0);
  auto res = reinforce_train(su.cw, su.acts, plant, cfg);

  util::Rng er(999);
  double rate = 0.0, cost = 0.0;
  const int kEval = 1000;
  for (int i = 0; i < kEval; ++i) {
    auto rng = er.derive("eval", i);
    auto ep = run_episode(res.weights, su.cw, su.acts, plant, cfg, rng);
    rate += ep.comm_rate;
    cost += ep.total_cost;
  }
  rate /= kEval;
  cost /= kEval;
  CHECK(rate >= 0.95);

  // Rollout comparison against the explicit always-trigger policy.
  auto always = init_trigger_policy(1, 8, 3);
  always.b2 = 15.0;
  double always_cost = 0.0;
  for (int i = 0; i < kEval; ++i) {
    auto rng = er.derive("always", i);
    always_cost += run_episode(always, su.cw, su.acts, plant, cfg, rng).total_cost;
  }
  always_cost /= kEval;
  CHECK(cost <= 1.05 * always_cost);
}

TEST_CASE("a dominating penalty drives the rate to the forced floor") {
  Setup su;
  auto inst = three_state_instance(su.cw, su.acts);
  DiscretePlant plant(inst);
  // Larger than the whole state-cost range of the episode (dev <= 4 over
  // 6 steps plus terminal), so voluntary triggers can never pay off.
  TriggerConfig cfg = tiny_cfg(50.0);
  auto res = reinforce_train(su.cw, su.acts, plant, cfg);

  util::Rng er(999);
  double rate = 0.0;
  const int kEval = 1000;
  double floor = 0.0;
  for (int i = 0; i < kEval; ++i) {
    auto rng = er.derive("eval", i);
    auto ep = run_episode(res.weights, su.cw, su.acts, plant, cfg, rng);
    rate += ep.comm_rate;
    floor = std::max(floor, std::abs(ep.comm_rate - 1.0 / 3.0));
  }
  rate /= kEval;
  CHECK(rate >= 1.0 / 3.0 - 1e-12);
  CHECK(rate <= 1.0 / 3.0 + 0.01);
}
