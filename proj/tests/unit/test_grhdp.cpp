// Copyright 2026 The enchvac Authors.
// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <vector>

#include "enchvac/ctrl/grhdp.hpp"
#include "enchvac/util/rng.hpp"

using namespace enchvac;
using namespace enchvac::ctrl;

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

Eigen::MatrixXd rand_mat(util::Rng& rng, int r, int c, double range) {
  Eigen::MatrixXd m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = (rng.next_double() * 2.0 - 1.0) * range;
  return m;
}

Eigen::MatrixXd rand_pd(util::Rng& rng, int n) {
  Eigen::MatrixXd a = rand_mat(rng, n, n, 1.0);
  return a.transpose() * a + 0.1 * Eigen::MatrixXd::Identity(n, n);
}

GrhdpConfig toy_cfg(int n, int m) {
  GrhdpConfig cfg;
  cfg.D = Eigen::MatrixXd::Identity(n, n);
  cfg.M = Eigen::MatrixXd::Identity(m, m);
  return cfg;
}

const ActivationSet& acts() {
  static ActivationSet a = ActivationSet::fitted();
  return a;
}

ControllerWeights rand_weights(util::Rng& rng, int n, int m, int d, double scale) {
  ControllerWeights w;
  w.Wa1 = rand_mat(rng, d, n, scale);
  w.Wa2 = rand_mat(rng, m, d, scale);
  w.Wc1g = rand_mat(rng, d, n + m, scale);
  w.Wc2g = rand_mat(rng, 1, d, scale);
  w.Wc1w = rand_mat(rng, d, n + m, scale);
  w.Wc2w = rand_mat(rng, 1, d, scale);
  w.u_max = Eigen::VectorXd::Constant(m, 1.0);
  return w;
}

// Max entry deviation of analytic vs central-difference gradient, relative to
// the dominant finite-difference entry.
template <typename LossFn>
double fd_rel_err(Eigen::MatrixXd& target, const Eigen::MatrixXd& analytic,
                  LossFn loss) {
  Eigen::MatrixXd fd(target.rows(), target.cols());
  const double h = 1e-5;
  for (int i = 0; i < target.rows(); ++i) {
    for (int j = 0; j < target.cols(); ++j) {
      double keep = target(i, j);
      target(i, j) = keep + h;
      double up = loss();
      target(i, j) = keep - h;
      double dn = loss();
      target(i, j) = keep;
      fd(i, j) = (up - dn) / (2.0 * h);
    }
  }
  double denom = std::max(fd.cwiseAbs().maxCoeff(), 1e-8);
  return (analytic - fd).cwiseAbs().maxCoeff() / denom;
}

// Disturbance rejection: a constant load pushes x up and the control pulls
// it back down; holding u at mid-range cancels the load exactly, so the
// bias-free actor's pinned midpoint u(0) = u_max/2 is optimal at the origin
// and learning only has to shape the deviation response.
struct ToyPlant final : PlantInterface {
  double x = 1.0;
  Eigen::VectorXd reset(uint64_t seed) override {
    util::Rng r(seed);
    x = 1.0 + 0.5 * r.next_double();
    return vec({x});
  }
  Eigen::VectorXd step(const Eigen::VectorXd& u) override {
    x = 0.9 * x + 0.15 - u(0);
    return vec({x});
  }
  int state_dim() const override { return 1; }
  int control_dim() const override { return 1; }
  Eigen::VectorXd control_upper_bound() const override { return vec({0.3}); }
};

}  // namespace

TEST_CASE("external_reward is the quadratic form") {
  auto cfg = toy_cfg(2, 1);
  CHECK(external_reward(vec({1.0, -1.0}), vec({2.0}), cfg) == doctest::Approx(6.0));
  CHECK(external_reward(vec({0.0, 0.0}), vec({0.0}), cfg) == 0.0);
  CHECK_THROWS_AS(external_reward(vec({1.0}), vec({2.0}), cfg), InvalidParams);

  util::Rng rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    GrhdpConfig c;
    c.D = rand_pd(rng, 3);
    c.M = rand_pd(rng, 2);
    auto x = rand_vec(rng, 3, 2.0);
    auto u = rand_vec(rng, 2, 2.0);
    double got = external_reward(x, u, c);
    double want = 0.0;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) want += x(i) * c.D(i, j) * x(j);
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) want += u(i) * c.M(i, j) * u(j);
    CHECK(got == doctest::Approx(want).epsilon(1e-12));
    CHECK(got >= 0.0);
  }
}

TEST_CASE("config validation rejects bad discounts and indefinite costs") {
  auto cfg = toy_cfg(2, 1);
  CHECK_NOTHROW(cfg.validate(2, 1));

  auto bad = cfg;
  bad.alpha = 1.5;
  CHECK_THROWS_AS(bad.validate(2, 1), InvalidParams);
  bad = cfg;
  bad.gamma = -0.1;
  CHECK_THROWS_AS(bad.validate(2, 1), InvalidParams);
  bad = cfg;
  bad.zeta = 0.0;
  CHECK_THROWS_AS(bad.validate(2, 1), InvalidParams);
  bad = cfg;
  bad.D(0, 1) = 0.5;  // asymmetric
  CHECK_THROWS_AS(bad.validate(2, 1), InvalidParams);
  bad = cfg;
  bad.M(0, 0) = -1.0;  // negative eigenvalue
  CHECK_THROWS_AS(bad.validate(2, 1), InvalidParams);
  CHECK_THROWS_AS(cfg.validate(3, 1), InvalidParams);  // D is 2x2
}

TEST_CASE("init_weights is seeded, bounded, and validated") {
  auto u_max = vec({0.5, 0.8});
  auto a = init_weights(4, 2, 8, u_max, 7);
  auto b = init_weights(4, 2, 8, u_max, 7);
  CHECK(a.Wa1 == b.Wa1);
  CHECK(a.Wc2w == b.Wc2w);
  auto c = init_weights(4, 2, 8, u_max, 8);
  CHECK(a.Wa1 != c.Wa1);

  CHECK(a.Wa1.cwiseAbs().maxCoeff() <= 1.0 / std::sqrt(4.0));
  CHECK(a.Wc1g.cwiseAbs().maxCoeff() <= 1.0 / std::sqrt(6.0));
  CHECK(a.n() == 4);
  CHECK(a.m() == 2);
  CHECK(a.d() == 8);

  CHECK_THROWS_AS(init_weights(0, 2, 8, u_max, 1), InvalidParams);
  auto w = a;
  w.u_max(0) = 0.0;
  CHECK_THROWS_AS(w.validate(), InvalidParams);
  w = a;
  w.Wa2(0, 0) = std::nan("");
  CHECK_THROWS_AS(w.validate(), InvalidParams);
}

TEST_CASE("actor plain forward saturates to half range at zero weights") {
  util::Rng rng(2);
  auto w = rand_weights(rng, 3, 2, 6, 0.0);  // all-zero matrices
  w.u_max = vec({0.6, 1.2});
  auto u = actor_forward(vec({1.0, -2.0, 0.5}), w, EvalMode::plain, acts());
  CHECK(u(0) == doctest::Approx(0.3));
  CHECK(u(1) == doctest::Approx(0.6));

  for (int trial = 0; trial < 50; ++trial) {
    auto wr = rand_weights(rng, 3, 2, 6, 2.0);
    wr.u_max = vec({0.6, 1.2});
    auto ur = actor_forward(rand_vec(rng, 3, 3.0), wr, EvalMode::plain, acts());
    for (int i = 0; i < 2; ++i) {
      CHECK(ur(i) >= 0.0);
      CHECK(ur(i) <= wr.u_max(i));
    }
  }
  CHECK_THROWS_AS(actor_forward(vec({1.0}), w, EvalMode::plain, acts()),
                  InvalidParams);
}

TEST_CASE("critic plain forward matches the scalar-loop oracle") {
  util::Rng rng(3);
  auto w = rand_weights(rng, 3, 2, 6, 1.0);

  auto wz = w;
  wz.Wc2g.setZero();
  CHECK(critic_forward(rand_vec(rng, 3, 1.0), rand_vec(rng, 2, 1.0), CriticId::g,
                       wz, EvalMode::plain, acts()) == 0.0);

  auto wh = w;
  wh.Wc1w.setZero();
  CHECK(critic_forward(vec({1.0, 2.0, 3.0}), vec({0.5, 0.5}), CriticId::w, wh,
                       EvalMode::plain, acts()) ==
        doctest::Approx(0.5 * wh.Wc2w.sum()));

  for (int trial = 0; trial < 10; ++trial) {
    auto x = rand_vec(rng, 3, 2.0);
    auto u = rand_vec(rng, 2, 1.0);
    double got = critic_forward(x, u, CriticId::g, w, EvalMode::plain, acts());
    // scalar-loop oracle
    std::vector<double> cat(5);
    for (int i = 0; i < 3; ++i) cat[static_cast<size_t>(i)] = x(i);
    for (int i = 0; i < 2; ++i) cat[static_cast<size_t>(3 + i)] = u(i);
    double want = 0.0;
    for (int r = 0; r < 6; ++r) {
      double pre = 0.0;
      for (int c = 0; c < 5; ++c) pre += w.Wc1g(r, c) * cat[static_cast<size_t>(c)];
      want += w.Wc2g(0, r) / (1.0 + std::exp(-pre));
    }
    CHECK(got == doctest::Approx(want).epsilon(1e-10));
  }
}

TEST_CASE("targets reduce to the reward for zero critics and zero discounts") {
  util::Rng rng(4);
  auto cfg = toy_cfg(3, 2);
  auto w = rand_weights(rng, 3, 2, 6, 1.0);
  auto x = rand_vec(rng, 3, 1.0), u = rand_vec(rng, 2, 1.0);
  auto x2 = rand_vec(rng, 3, 1.0), u2 = rand_vec(rng, 2, 1.0);
  double r = external_reward(x, u, cfg);

  auto wz = w;
  wz.Wc2g.setZero();
  wz.Wc2w.setZero();
  CHECK(critic1_target(x, u, x2, u2, wz, cfg, acts()) == doctest::Approx(r));
  CHECK(critic2_target(x, u, x2, u2, wz, cfg, acts()) == doctest::Approx(r));

  auto c0 = cfg;
  c0.alpha = 0.0;
  CHECK(critic1_target(x, u, x2, u2, w, c0, acts()) == doctest::Approx(r));
  auto cg = cfg;
  cg.gamma = 0.0;
  CHECK(critic2_target(x, u, x2, u2, w, cg, acts()) ==
        doctest::Approx(critic1_target(x, u, x2, u2, w, cg, acts())));

  // Composition oracle.
  double want = r + cfg.alpha * critic_forward(x2, u2, CriticId::g, w,
                                               EvalMode::plain_poly, acts()) +
                cfg.gamma * critic_forward(x2, u2, CriticId::w, w,
                                           EvalMode::plain_poly, acts());
  CHECK(critic2_target(x, u, x2, u2, w, cfg, acts()) ==
        doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("analytic gradients match central finite differences") {
  // Scales keep every pre-activation inside the activation fit interval,
  // where the backward chain is the exact derivative of the loss. Off the
  // interval the actor chain clamps derivatives by design (covered below).
  util::Rng rng(5);
  double worst = 0.0;
  for (int cfg_i = 0; cfg_i < 60; ++cfg_i) {
    int n = 1 + static_cast<int>(rng.next_below(4));
    int m = 1 + static_cast<int>(rng.next_below(3));
    int d = 2 + static_cast<int>(rng.next_below(6));
    auto w = rand_weights(rng, n, m, d, 0.5);
    for (int i = 0; i < m; ++i) w.u_max(i) = 0.3 + rng.next_double();

    std::vector<Transition> batch(3);
    std::vector<double> targets(3);
    for (auto& t : batch) {
      t.x = rand_vec(rng, n, 1.0);
      t.u = rand_vec(rng, m, 1.0);
      t.x_next = rand_vec(rng, n, 1.0);
      t.u_next = rand_vec(rng, m, 1.0);
    }
    for (auto& t : targets) t = rand_vec(rng, 1, 3.0)(0);

    CriticId which = cfg_i % 2 == 0 ? CriticId::g : CriticId::w;
    auto cg = critic_loss_grads(which, batch, targets, w, acts());
    Eigen::MatrixXd& W1 = which == CriticId::g ? w.Wc1g : w.Wc1w;
    Eigen::MatrixXd& W2 = which == CriticId::g ? w.Wc2g : w.Wc2w;
    auto loss = [&] {
      return critic_loss_grads(which, batch, targets, w, acts()).loss;
    };
    worst = std::max(worst, fd_rel_err(W1, cg.g1, loss));
    worst = std::max(worst, fd_rel_err(W2, cg.g2, loss));

    std::vector<Eigen::VectorXd> states;
    for (int i = 0; i < 3; ++i) states.push_back(rand_vec(rng, n, 1.0));
    auto ag = actor_loss_grads(states, w, acts());
    auto aloss = [&] { return actor_loss_grads(states, w, acts()).loss; };
    worst = std::max(worst, fd_rel_err(w.Wa1, ag.g1, aloss));
    worst = std::max(worst, fd_rel_err(w.Wa2, ag.g2, aloss));
  }
  CHECK(worst <= 1e-4);
}

TEST_CASE("actor gradients stay bounded when pre-activations leave the fit interval") {
  util::Rng rng(17);
  auto w = rand_weights(rng, 2, 1, 6, 1.0);
  w.u_max(0) = 0.4;
  w.Wa1 *= 200.0;  // hidden pre-activations far outside the interval
  w.Wa2 *= 50.0;
  std::vector<Eigen::VectorXd> states{rand_vec(rng, 2, 1.5), rand_vec(rng, 2, 1.5)};
  auto g = actor_loss_grads(states, w, acts());
  CHECK(std::isfinite(g.loss));
  CHECK(g.g1.allFinite());
  CHECK(g.g2.allFinite());
  // The interval-clamped derivatives cap the chain; without them the quintic
  // derivative at |pre| ~ 300 would put these past 1e8.
  CHECK(g.g1.cwiseAbs().maxCoeff() < 1e3);
  CHECK(g.g2.cwiseAbs().maxCoeff() < 1e3);
}

TEST_CASE("updates leave weights alone when the gradient vanishes") {
  util::Rng rng(6);
  auto cfg = toy_cfg(2, 1);
  auto w = rand_weights(rng, 2, 1, 4, 1.0);
  w.Wc2g.setZero();

  // Zero state/control makes the reward zero, so prediction equals target.
  std::vector<Transition> batch{{vec({0.0, 0.0}), vec({0.0}), vec({0.0, 0.0}),
                                 vec({0.0})}};
  auto before = w;
  auto res = update_critic(CriticId::g, batch, w, cfg, acts());
  CHECK(res.loss == 0.0);
  CHECK(w.Wc1g == before.Wc1g);
  CHECK(w.Wc2g == before.Wc2g);

  // A zero value critic gives the actor nothing to descend.
  w.Wc2w.setZero();
  std::vector<Eigen::VectorXd> states{vec({0.3, -0.7})};
  before = w;
  auto ares = update_actor(states, w, cfg, acts());
  CHECK(ares.loss == 0.0);
  CHECK(w.Wa1 == before.Wa1);

  // Zero learning rate freezes weights even with a live gradient.
  auto wl = rand_weights(rng, 2, 1, 4, 1.0);
  auto frozen = wl;
  auto cfg0 = cfg;
  cfg0.zeta_a = 0.0;
  update_actor(states, wl, cfg0, acts());
  CHECK(wl.Wa1 == frozen.Wa1);
  CHECK(wl.Wa2 == frozen.Wa2);
}

TEST_CASE("a small critic step descends the loss") {
  util::Rng rng(7);
  auto cfg = toy_cfg(2, 1);
  cfg.zeta = 1e-3;
  auto w = rand_weights(rng, 2, 1, 4, 1.0);
  std::vector<Transition> batch{{rand_vec(rng, 2, 1.0), rand_vec(rng, 1, 0.5),
                                 rand_vec(rng, 2, 1.0), rand_vec(rng, 1, 0.5)}};

  std::vector<double> t{critic1_target(batch[0].x, batch[0].u, batch[0].x_next,
                                       batch[0].u_next, w, cfg, acts())};
  double before = critic_loss_grads(CriticId::g, batch, t, w, acts()).loss;
  update_critic(CriticId::g, batch, w, cfg, acts());
  double after = critic_loss_grads(CriticId::g, batch, t, w, acts()).loss;
  CHECK(after <= before);
}

TEST_CASE("weight checkpoints round-trip exactly") {
  util::Rng rng(8);
  auto w = rand_weights(rng, 3, 2, 6, 1.0);
  w.u_max = vec({0.5, 0.8});
  auto path = std::filesystem::temp_directory_path() / "enchvac_test_ctrl.bin";
  save_weights(path, w);
  auto r = load_weights(path);
  CHECK(r.Wa1 == w.Wa1);
  CHECK(r.Wa2 == w.Wa2);
  CHECK(r.Wc1g == w.Wc1g);
  CHECK(r.Wc2g == w.Wc2g);
  CHECK(r.Wc1w == w.Wc1w);
  CHECK(r.Wc2w == w.Wc2w);
  CHECK(r.u_max == w.u_max);

  std::filesystem::resize_file(path, 16);
  CHECK_THROWS_AS(load_weights(path), he::SerializationError);
  std::filesystem::remove(path);
}

TEST_CASE("encrypted forwards track the plain polynomial forwards") {
  auto ctx = he::make_context(he::HeParams::deep6(), he::BackendKind::rlwe);
  auto keys = he::keygen(ctx, 11);
  util::Rng rng(9);
  // Hidden width 16 covers both n and n + m, as the encrypted path needs.
  auto w = rand_weights(rng, 8, 4, 16, 0.3);
  w.u_max = Eigen::VectorXd::Constant(4, 0.5);

  for (int trial = 0; trial < 3; ++trial) {
    auto x = rand_vec(rng, 8, 1.5);
    auto u_plain = actor_forward(x, w, EvalMode::plain_poly, acts());
    auto u_enc = actor_forward(x, w, EvalMode::encrypted, acts(), &keys);
    CHECK((u_plain - u_enc).cwiseAbs().maxCoeff() <= 5e-2);

    auto u = rand_vec(rng, 4, 0.4).cwiseAbs();
    double s_plain = critic_forward(x, u, CriticId::w, w, EvalMode::plain_poly, acts());
    double s_enc =
        critic_forward(x, u, CriticId::w, w, EvalMode::encrypted, acts(), &keys);
    CHECK(std::abs(s_plain - s_enc) <= 5e-2);
  }

  // The shallow preset cannot host the depth-5 actor.
  auto shallow_ctx = he::make_context(he::HeParams::paper2024(), he::BackendKind::rlwe);
  auto shallow = he::keygen(shallow_ctx, 11);
  CHECK_THROWS_AS(
      actor_forward(rand_vec(rng, 8, 1.0), w, EvalMode::encrypted, acts(), &shallow),
      he::DepthExhausted);

  CHECK_THROWS_AS(actor_forward(rand_vec(rng, 8, 1.0), w, EvalMode::encrypted, acts()),
                  InvalidParams);
}

TEST_CASE("training on the 1-D toy plant beats the uncontrolled rollout") {
  ToyPlant plant;
  auto cfg = toy_cfg(1, 1);
  cfg.M = 0.01 * Eigen::MatrixXd::Identity(1, 1);
  cfg.alpha = 0.5;
  cfg.gamma = 0.5;
  cfg.zeta = 0.05;
  cfg.zeta_a = 0.02;
  cfg.hidden = 8;
  cfg.epochs = 150;
  cfg.episode_len = 32;
  cfg.inner_steps = 80;
  cfg.explore_sigma = 0.7;
  cfg.seed = 3;

  auto zero_epochs = cfg;
  zero_epochs.epochs = 0;
  auto init = train_controller(plant, zero_epochs, acts());
  CHECK(init.log.empty());
  CHECK(init.weights.Wa1 == init_weights(1, 1, 8, vec({0.3}), cfg.seed).Wa1);

  auto r1 = train_controller(plant, cfg, acts());
  auto r2 = train_controller(plant, cfg, acts());
  REQUIRE(r1.log.size() == r2.log.size());
  for (size_t i = 0; i < r1.log.size(); ++i) {
    CHECK(r1.log[i].l_c1 == r2.log[i].l_c1);
    CHECK(r1.log[i].l_o == r2.log[i].l_o);
    CHECK(r1.log[i].mean_reward == r2.log[i].mean_reward);
  }

  // Closed-loop cost from x0 = 1.25 under three policies: trained actor,
  // untrained actor (its pinned u = u_max/2 already cancels the load), and
  // no control at all. Training must beat both, the init policy by margin.
  auto rollout_cost = [&](const ControllerWeights* w) {
    double x = 1.25, acc = 0.0;
    for (int k = 0; k < 40; ++k) {
      double u = 0.0;
      if (w != nullptr)
        u = actor_forward(vec({x}), *w, EvalMode::plain_poly, acts())(0);
      x = 0.9 * x + 0.15 - u;
      acc += x * x;
    }
    return acc;
  };
  double trained = rollout_cost(&r1.weights);
  double untrained = rollout_cost(&init.weights);
  double free_run = rollout_cost(nullptr);
  CHECK(trained < free_run);
  CHECK(trained < 0.8 * untrained);

  auto log_path = std::filesystem::temp_directory_path() / "enchvac_test_log.csv";
  write_training_log(log_path, r1.log);
  std::ifstream is(log_path);
  std::string header;
  std::getline(is, header);
  CHECK(header == "epoch,l_c1,l_c2,l_o,mean_reward");
  std::filesystem::remove(log_path);
}
