// Copyright 2026 The enchvac Authors.
// SPDX-License-Identifier: Apache-2.0
#include "enchvac/ctrl/grhdp.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "enchvac/util/rng.hpp"

namespace enchvac::ctrl {

namespace {

constexpr char kWeightsMagic[4] = {'E', 'W', 'T', '1'};

bool all_finite(const Eigen::MatrixXd& m) { return m.allFinite(); }

double sigmoid(double y) { return 1.0 / (1.0 + std::exp(-y)); }

void require(bool ok, const char* what) {
  if (!ok) throw InvalidParams(what);
}

// Symmetric positive-eigenvalue test.
void require_pd(const Eigen::MatrixXd& A, const char* name) {
  require(A.rows() == A.cols() && A.rows() > 0, "cost matrix must be square");
  double scale = std::max(1.0, A.cwiseAbs().maxCoeff());
  require((A - A.transpose()).cwiseAbs().maxCoeff() <= 1e-9 * scale,
          "cost matrix must be symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
  if (es.info() != Eigen::Success || es.eigenvalues().minCoeff() <= 0.0)
    throw InvalidParams(std::string(name) + " must be positive definite");
}

Eigen::MatrixXd uniform_init(util::Rng rng, int rows, int cols) {
  double bound = 1.0 / std::sqrt(static_cast<double>(cols));
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = (rng.next_double() * 2.0 - 1.0) * bound;
  return m;
}

void write_u32(std::ostream& os, uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t read_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(b[i]) << (8 * i);
  return v;
}

void write_f64(std::ostream& os, double d) {
  uint64_t v;
  std::memcpy(&v, &d, 8);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

double read_f64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
  double d;
  std::memcpy(&d, &v, 8);
  return d;
}

void write_mat(std::ostream& os, const Eigen::MatrixXd& m) {
  write_u32(os, static_cast<uint32_t>(m.rows()));
  write_u32(os, static_cast<uint32_t>(m.cols()));
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) write_f64(os, m(i, j));
}

Eigen::MatrixXd read_mat(std::istream& is) {
  uint32_t rows = read_u32(is), cols = read_u32(is);
  if (!is || rows == 0 || cols == 0 || rows > (1u << 20) || cols > (1u << 20))
    throw he::SerializationError("weight file: bad matrix header");
  Eigen::MatrixXd m(rows, cols);
  for (uint32_t i = 0; i < rows; ++i)
    for (uint32_t j = 0; j < cols; ++j) m(i, j) = read_f64(is);
  if (!is) throw he::SerializationError("weight file: truncated matrix data");
  return m;
}

std::vector<double> to_std(const Eigen::VectorXd& v) {
  return {v.data(), v.data() + v.size()};
}

// Shared plain_poly critic pieces.
struct CriticTrace {
  Eigen::VectorXd c;     // cat(x, u)
  Eigen::VectorXd pre;   // Wc1 c
  Eigen::VectorXd h;     // sigmoid_poly(pre)
  double s = 0.0;        // Wc2 h
};

CriticTrace critic_trace(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                         const Eigen::MatrixXd& Wc1, const Eigen::MatrixXd& Wc2,
                         const nn::ActivationPoly& sig) {
  CriticTrace t;
  t.c.resize(x.size() + u.size());
  t.c << x, u;
  t.pre = Wc1 * t.c;
  t.h.resize(t.pre.size());
  for (int i = 0; i < t.pre.size(); ++i) t.h(i) = sig.eval(t.pre(i));
  t.s = (Wc2 * t.h)(0);
  return t;
}

const Eigen::MatrixXd& critic_w1(const ControllerWeights& w, CriticId which) {
  return which == CriticId::g ? w.Wc1g : w.Wc1w;
}
const Eigen::MatrixXd& critic_w2(const ControllerWeights& w, CriticId which) {
  return which == CriticId::g ? w.Wc2g : w.Wc2w;
}

}  // namespace

void ControllerWeights::validate() const {
  require(Wa1.size() > 0 && Wa2.size() > 0, "empty actor weights");
  int dd = d(), nn_ = n(), mm = m();
  require(Wa2.cols() == dd, "Wa2 columns must equal hidden width");
  require(Wc1g.rows() == dd && Wc1w.rows() == dd, "critic hidden width mismatch");
  require(Wc1g.cols() == nn_ + mm && Wc1w.cols() == nn_ + mm,
          "critic input width must be n + m");
  require(Wc2g.rows() == 1 && Wc2w.rows() == 1, "critic output must be scalar");
  require(Wc2g.cols() == dd && Wc2w.cols() == dd, "critic output width mismatch");
  require(u_max.size() == mm, "u_max length must equal control width");
  require(all_finite(Wa1) && all_finite(Wa2) && all_finite(Wc1g) &&
              all_finite(Wc2g) && all_finite(Wc1w) && all_finite(Wc2w) &&
              u_max.allFinite(),
          "weights must be finite");
  require((u_max.array() > 0.0).all(), "u_max must be elementwise positive");
}

ControllerWeights init_weights(int n, int m, int d, const Eigen::VectorXd& u_max,
                               uint64_t seed) {
  require(n > 0 && m > 0 && d > 0, "dimensions must be positive");
  util::Rng rng(seed);
  ControllerWeights w;
  w.Wa1 = uniform_init(rng.derive("Wa1"), d, n);
  w.Wa2 = uniform_init(rng.derive("Wa2"), m, d);
  w.Wc1g = uniform_init(rng.derive("Wc1g"), d, n + m);
  w.Wc2g = uniform_init(rng.derive("Wc2g"), 1, d);
  w.Wc1w = uniform_init(rng.derive("Wc1w"), d, n + m);
  w.Wc2w = uniform_init(rng.derive("Wc2w"), 1, d);
  w.u_max = u_max;
  w.validate();
  return w;
}

void save_weights(const std::filesystem::path& path, const ControllerWeights& w) {
  w.validate();
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw he::SerializationError("cannot open weight file for writing");
  os.write(kWeightsMagic, 4);
  write_u32(os, 1);  // version
  write_u32(os, static_cast<uint32_t>(w.n()));
  write_u32(os, static_cast<uint32_t>(w.m()));
  write_u32(os, static_cast<uint32_t>(w.d()));
  for (const auto* m : {&w.Wa1, &w.Wa2, &w.Wc1g, &w.Wc2g, &w.Wc1w, &w.Wc2w})
    write_mat(os, *m);
  for (int i = 0; i < w.u_max.size(); ++i) write_f64(os, w.u_max(i));
  if (!os) throw he::SerializationError("weight file write failed");
}

ControllerWeights load_weights(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw he::SerializationError("cannot open weight file");
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kWeightsMagic, 4) != 0)
    throw he::SerializationError("weight file: bad magic");
  if (read_u32(is) != 1) throw he::SerializationError("weight file: bad version");
  uint32_t n = read_u32(is), m = read_u32(is), d = read_u32(is);
  ControllerWeights w;
  w.Wa1 = read_mat(is);
  w.Wa2 = read_mat(is);
  w.Wc1g = read_mat(is);
  w.Wc2g = read_mat(is);
  w.Wc1w = read_mat(is);
  w.Wc2w = read_mat(is);
  w.u_max.resize(m);
  for (uint32_t i = 0; i < m; ++i) w.u_max(i) = read_f64(is);
  if (!is) throw he::SerializationError("weight file: truncated");
  if (w.n() != static_cast<int>(n) || w.m() != static_cast<int>(m) ||
      w.d() != static_cast<int>(d))
    throw he::SerializationError("weight file: dims header disagrees with matrices");
  w.validate();
  return w;
}

void GrhdpConfig::validate(int n, int m) const {
  require(alpha >= 0.0 && alpha <= 1.0, "alpha must lie in [0,1]");
  require(gamma >= 0.0 && gamma <= 1.0, "gamma must lie in [0,1]");
  require(zeta > 0.0 && zeta_a > 0.0, "learning rates must be positive");
  require(epochs >= 0, "epochs must be nonnegative");
  require(hidden > 0, "hidden width must be positive");
  require(episode_len >= 2, "episode must contain at least one transition");
  require(inner_steps > 0, "inner_steps must be positive");
  require(explore_sigma >= 0.0, "explore_sigma must be nonnegative");
  require(D.rows() == n && D.cols() == n, "D dimensions must match the state");
  require(M.rows() == m && M.cols() == m, "M dimensions must match the control");
  require_pd(D, "D");
  require_pd(M, "M");
}

double external_reward(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                       const GrhdpConfig& cfg) {
  require(x.size() == cfg.D.rows(), "state dimension does not match D");
  require(u.size() == cfg.M.rows(), "control dimension does not match M");
  return x.dot(cfg.D * x) + u.dot(cfg.M * u);
}

ActivationSet ActivationSet::fitted() {
  return {nn::fit_activation_coeffs(nn::ActFn::tanh, -4.0, 4.0),
          nn::fit_activation_coeffs(nn::ActFn::sigmoid, -4.0, 4.0)};
}

Eigen::VectorXd actor_forward(const Eigen::VectorXd& x, const ControllerWeights& w,
                              EvalMode mode, const ActivationSet& acts,
                              const he::KeySet* keys) {
  require(x.size() == w.n(), "actor input dimension mismatch");
  const int m = w.m();
  Eigen::VectorXd z(m);
  if (mode == EvalMode::encrypted) {
    require(keys != nullptr, "encrypted mode needs a key set");
    auto pm1 = nn::pack_diagonals(w.Wa1);
    auto pm2 = nn::pack_diagonals(w.Wa2);
    require(pm1.dim == pm2.dim, "encrypted actor needs hidden width >= max(n, m)");
    auto ct = he::encrypt(to_std(x), pm1.dim, *keys);
    std::vector<double> gain(m, 1.0);
    auto zc = nn::enc_two_layer_forward(pm1, pm2, acts.tanh_poly, ct, gain, *keys);
    auto zv = he::decrypt(zc, *keys);
    for (int i = 0; i < m; ++i) z(i) = zv[static_cast<size_t>(i)];
  } else {
    Eigen::VectorXd pre = w.Wa1 * x;
    Eigen::VectorXd rho(pre.size());
    for (int i = 0; i < pre.size(); ++i)
      rho(i) = mode == EvalMode::plain ? std::tanh(pre(i)) : acts.tanh_poly.eval(pre(i));
    z = w.Wa2 * rho;
  }
  Eigen::VectorXd u(m);
  for (int i = 0; i < m; ++i) {
    double s = mode == EvalMode::plain ? sigmoid(z(i)) : acts.sigmoid_poly.eval(z(i));
    u(i) = w.u_max(i) * s;
    if (mode != EvalMode::plain) u(i) = std::clamp(u(i), 0.0, w.u_max(i));
  }
  return u;
}

double critic_forward(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                      CriticId which, const ControllerWeights& w, EvalMode mode,
                      const ActivationSet& acts, const he::KeySet* keys) {
  require(x.size() == w.n() && u.size() == w.m(), "critic input dimension mismatch");
  const auto& W1 = critic_w1(w, which);
  const auto& W2 = critic_w2(w, which);
  if (mode == EvalMode::encrypted) {
    require(keys != nullptr, "encrypted mode needs a key set");
    auto pm1 = nn::pack_diagonals(W1);
    auto pm2 = nn::pack_diagonals(W2);
    require(pm1.dim == pm2.dim, "encrypted critic needs hidden width >= n + m");
    auto cx = he::encrypt(to_std(x), pm1.dim, *keys);
    auto cu = he::encrypt(to_std(u), pm1.dim, *keys);
    auto cat = nn::concat_cts(cx, static_cast<uint32_t>(x.size()), cu,
                              static_cast<uint32_t>(u.size()), *keys);
    const double unit_gain[] = {1.0};
    auto sc = nn::enc_two_layer_forward(pm1, pm2, acts.sigmoid_poly, cat, unit_gain,
                                        *keys);
    return he::decrypt(sc, *keys)[0];
  }
  Eigen::VectorXd c(x.size() + u.size());
  c << x, u;
  Eigen::VectorXd pre = W1 * c;
  Eigen::VectorXd h(pre.size());
  for (int i = 0; i < pre.size(); ++i)
    h(i) = mode == EvalMode::plain ? sigmoid(pre(i)) : acts.sigmoid_poly.eval(pre(i));
  return (W2 * h)(0);
}

double critic1_target(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                      const Eigen::VectorXd& x_next, const Eigen::VectorXd& u_next,
                      const ControllerWeights& w, const GrhdpConfig& cfg,
                      const ActivationSet& acts) {
  return external_reward(x, u, cfg) +
         cfg.alpha * critic_forward(x_next, u_next, CriticId::g, w,
                                    EvalMode::plain_poly, acts);
}

double critic2_target(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                      const Eigen::VectorXd& x_next, const Eigen::VectorXd& u_next,
                      const ControllerWeights& w, const GrhdpConfig& cfg,
                      const ActivationSet& acts) {
  return critic1_target(x, u, x_next, u_next, w, cfg, acts) +
         cfg.gamma * critic_forward(x_next, u_next, CriticId::w, w,
                                    EvalMode::plain_poly, acts);
}

CriticGrads critic_loss_grads(CriticId which, std::span<const Transition> batch,
                              std::span<const double> targets,
                              const ControllerWeights& w, const ActivationSet& acts) {
  require(!batch.empty(), "critic batch must not be empty");
  require(batch.size() == targets.size(), "one target per transition");
  const auto& W1 = critic_w1(w, which);
  const auto& W2 = critic_w2(w, which);
  CriticGrads g;
  g.g1 = Eigen::MatrixXd::Zero(W1.rows(), W1.cols());
  g.g2 = Eigen::MatrixXd::Zero(1, W2.cols());
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  for (size_t i = 0; i < batch.size(); ++i) {
    CriticTrace t = critic_trace(batch[i].x, batch[i].u, W1, W2, acts.sigmoid_poly);
    double e = (t.s - targets[i]) * inv_b;
    g.loss += 0.5 * (t.s - targets[i]) * (t.s - targets[i]) * inv_b;
    g.g2 += e * t.h.transpose();
    Eigen::VectorXd g_pre = (e * W2.transpose()).col(0);
    for (int j = 0; j < g_pre.size(); ++j) g_pre(j) *= acts.sigmoid_poly.deriv(t.pre(j));
    g.g1 += g_pre * t.c.transpose();
  }
  return g;
}

ActorGrads actor_loss_grads(std::span<const Eigen::VectorXd> states,
                            const ControllerWeights& w, const ActivationSet& acts) {
  require(!states.empty(), "actor batch must not be empty");
  ActorGrads g;
  g.g1 = Eigen::MatrixXd::Zero(w.Wa1.rows(), w.Wa1.cols());
  g.g2 = Eigen::MatrixXd::Zero(w.Wa2.rows(), w.Wa2.cols());
  const double inv_b = 1.0 / static_cast<double>(states.size());
  for (const auto& x : states) {
    require(x.size() == w.n(), "actor input dimension mismatch");
    Eigen::VectorXd pre1 = w.Wa1 * x;
    Eigen::VectorXd rho(pre1.size());
    // rho_t is the hidden value at the interval-clamped pre-activation; the
    // gradient products use it in place of rho so no factor of the chain can
    // grow with the polynomial's off-interval values.
    Eigen::VectorXd rho_t(pre1.size());
    for (int i = 0; i < pre1.size(); ++i) {
      rho(i) = acts.tanh_poly.eval(pre1(i));
      rho_t(i) = acts.tanh_poly.eval(
          std::clamp(pre1(i), acts.tanh_poly.lo, acts.tanh_poly.hi));
    }
    Eigen::VectorXd z = w.Wa2 * rho;
    Eigen::VectorXd u(z.size());
    Eigen::VectorXd in_box(z.size());
    for (int i = 0; i < z.size(); ++i) {
      double raw = w.u_max(i) * acts.sigmoid_poly.eval(z(i));
      u(i) = std::clamp(raw, 0.0, w.u_max(i));
      in_box(i) = raw > 0.0 && raw < w.u_max(i) ? 1.0 : 0.0;
    }

    CriticTrace t = critic_trace(x, u, w.Wc1w, w.Wc2w, acts.sigmoid_poly);
    g.loss += 0.5 * t.s * t.s * inv_b;

    // Every polynomial derivative below is evaluated at the pre-activation
    // clamped to the fit interval. Off the interval the quintic's derivative
    // grows like y^4, which turns weight growth into a self-amplifying
    // runaway that the clamped control keeps invisible in the loss.
    auto dsig = [&](double y) {
      return acts.sigmoid_poly.deriv(
          std::clamp(y, acts.sigmoid_poly.lo, acts.sigmoid_poly.hi));
    };
    auto dtanh = [&](double y) {
      return acts.tanh_poly.deriv(
          std::clamp(y, acts.tanh_poly.lo, acts.tanh_poly.hi));
    };
    double f = t.s * inv_b;
    Eigen::VectorXd g_prec = (f * w.Wc2w.transpose()).col(0);
    for (int j = 0; j < g_prec.size(); ++j) g_prec(j) *= dsig(t.pre(j));
    Eigen::VectorXd g_c = w.Wc1w.transpose() * g_prec;
    Eigen::VectorXd g_u = g_c.tail(u.size());
    Eigen::VectorXd g_z(z.size());
    // Saturated units backprop a straight-through 0.1 slope instead of the
    // true (zero) subgradient: a hard mask would freeze a unit that an early
    // still-uninformed critic pushed into the rail.
    for (int i = 0; i < z.size(); ++i) {
      double s = in_box(i) != 0.0 ? dsig(z(i)) : 0.1;
      g_z(i) = g_u(i) * w.u_max(i) * s;
    }
    g.g2 += g_z * rho_t.transpose();
    Eigen::VectorXd g_rho = w.Wa2.transpose() * g_z;
    for (int i = 0; i < g_rho.size(); ++i) g_rho(i) *= dtanh(pre1(i));
    g.g1 += g_rho * x.transpose();
  }
  return g;
}

UpdateResult update_critic(CriticId which, std::span<const Transition> batch,
                           ControllerWeights& w, const GrhdpConfig& cfg,
                           const ActivationSet& acts) {
  require(!batch.empty(), "critic batch must not be empty");
  std::vector<double> targets(batch.size());
  for (size_t i = 0; i < batch.size(); ++i) {
    const auto& t = batch[i];
    targets[i] = which == CriticId::g
                     ? critic1_target(t.x, t.u, t.x_next, t.u_next, w, cfg, acts)
                     : critic2_target(t.x, t.u, t.x_next, t.u_next, w, cfg, acts);
  }
  CriticGrads g = critic_loss_grads(which, batch, targets, w, acts);
  if (std::isfinite(g.loss)) {
    if (which == CriticId::g) {
      w.Wc1g -= cfg.zeta * g.g1;
      w.Wc2g -= cfg.zeta * g.g2;
    } else {
      w.Wc1w -= cfg.zeta * g.g1;
      w.Wc2w -= cfg.zeta * g.g2;
    }
  }
  return {g.loss};
}

UpdateResult update_actor(std::span<const Eigen::VectorXd> states,
                          ControllerWeights& w, const GrhdpConfig& cfg,
                          const ActivationSet& acts) {
  ActorGrads g = actor_loss_grads(states, w, acts);
  if (std::isfinite(g.loss)) {
    w.Wa1 -= cfg.zeta_a * g.g1;
    w.Wa2 -= cfg.zeta_a * g.g2;
  }
  return {g.loss};
}

TrainResult train_controller(PlantInterface& plant, const GrhdpConfig& cfg,
                             const ActivationSet& acts) {
  const int n = plant.state_dim();
  const int m = plant.control_dim();
  cfg.validate(n, m);
  Eigen::VectorXd umax = plant.control_upper_bound();
  require(umax.size() == m && (umax.array() > 0.0).all(),
          "plant control bound must be positive and m-dimensional");

  TrainResult out;
  out.weights = init_weights(n, m, cfg.hidden, umax, cfg.seed);
  if (cfg.epochs == 0) return out;

  util::Rng base(cfg.seed);
  double zeta = cfg.zeta;
  double zeta_a = cfg.zeta_a;
  int epoch_retries = 0;
  double prev_total = std::numeric_limits<double>::infinity();
  int quiet_epochs = 0;

  for (int epoch = 0; epoch < cfg.epochs;) {
    // Collection is derived from the epoch index alone so a rolled-back retry
    // replays the identical episode under the halved rate.
    auto rng = base.derive("episode", static_cast<uint64_t>(epoch));
    Eigen::VectorXd x = plant.reset(rng.next_u64());
    std::vector<Eigen::VectorXd> xs, us;
    xs.reserve(cfg.episode_len);
    us.reserve(cfg.episode_len);
    for (int k = 0; k < cfg.episode_len; ++k) {
      Eigen::VectorXd u = actor_forward(x, out.weights, EvalMode::plain_poly, acts);
      for (int i = 0; i < m; ++i) {
        u(i) += cfg.explore_sigma * umax(i) * rng.next_gaussian();
        u(i) = std::clamp(u(i), 0.0, umax(i));
      }
      xs.push_back(x);
      us.push_back(u);
      x = plant.step(u);
    }
    std::vector<Transition> batch;
    batch.reserve(xs.size() - 1);
    for (size_t k = 0; k + 1 < xs.size(); ++k)
      batch.push_back({xs[k], us[k], xs[k + 1], us[k + 1]});

    // Targets are frozen at epoch entry.
    ControllerWeights snap = out.weights;
    std::vector<double> t1(batch.size()), t2(batch.size());
    for (size_t i = 0; i < batch.size(); ++i) {
      const auto& t = batch[i];
      t1[i] = critic1_target(t.x, t.u, t.x_next, t.u_next, snap, cfg, acts);
      t2[i] = critic2_target(t.x, t.u, t.x_next, t.u_next, snap, cfg, acts);
    }

    EpochLog entry;
    entry.epoch = epoch;
    bool diverged = false;
    bool critic_phase = true;

    for (int s = 0; s < cfg.inner_steps && !diverged; ++s) {
      CriticGrads g = critic_loss_grads(CriticId::g, batch, t1, out.weights, acts);
      if (!std::isfinite(g.loss)) { diverged = true; break; }
      out.weights.Wc1g -= zeta * g.g1;
      out.weights.Wc2g -= zeta * g.g2;
    }
    // Logged losses are evaluated at the weights the epoch keeps, which also
    // catches a final step that blew up after the last in-loop check.
    if (!diverged) {
      entry.l_c1 = critic_loss_grads(CriticId::g, batch, t1, out.weights, acts).loss;
      diverged = !std::isfinite(entry.l_c1);
    }
    for (int s = 0; s < cfg.inner_steps && !diverged; ++s) {
      CriticGrads g = critic_loss_grads(CriticId::w, batch, t2, out.weights, acts);
      if (!std::isfinite(g.loss)) { diverged = true; break; }
      out.weights.Wc1w -= zeta * g.g1;
      out.weights.Wc2w -= zeta * g.g2;
    }
    if (!diverged) {
      entry.l_c2 = critic_loss_grads(CriticId::w, batch, t2, out.weights, acts).loss;
      diverged = !std::isfinite(entry.l_c2);
    }
    if (!diverged) {
      critic_phase = false;
      for (int s = 0; s < cfg.inner_steps && !diverged; ++s) {
        ActorGrads g = actor_loss_grads(xs, out.weights, acts);
        if (!std::isfinite(g.loss)) { diverged = true; break; }
        out.weights.Wa1 -= zeta_a * g.g1;
        out.weights.Wa2 -= zeta_a * g.g2;
      }
      if (!diverged) {
        entry.l_o = actor_loss_grads(xs, out.weights, acts).loss;
        diverged = !std::isfinite(entry.l_o);
      }
    }

    if (diverged) {
      out.weights = snap;
      if (++epoch_retries > 5)
        throw InvalidParams("training diverged after 5 rate halvings");
      (critic_phase ? zeta : zeta_a) *= 0.5;
      continue;  // retry the same epoch under the halved rate
    }
    epoch_retries = 0;

    double reward_sum = 0.0;
    for (size_t k = 0; k < xs.size(); ++k)
      reward_sum += external_reward(xs[k], us[k], cfg);
    entry.mean_reward = reward_sum / static_cast<double>(xs.size());
    out.log.push_back(entry);

    double total = entry.l_c1 + entry.l_c2 + entry.l_o;
    double rel = std::abs(total - prev_total) /
                 std::max(std::abs(prev_total), 1e-12);
    quiet_epochs = rel < 1e-4 ? quiet_epochs + 1 : 0;
    prev_total = total;
    ++epoch;
    if (quiet_epochs >= 10) {
      out.converged = true;
      break;
    }
  }
  return out;
}

void write_training_log(const std::filesystem::path& path,
                        std::span<const EpochLog> log) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw he::SerializationError("cannot open training log for writing");
  os << "epoch,l_c1,l_c2,l_o,mean_reward\n";
  char line[192];
  for (const auto& e : log) {
    std::snprintf(line, sizeof line, "%d,%.9g,%.9g,%.9g,%.9g\n", e.epoch, e.l_c1,
                  e.l_c2, e.l_o, e.mean_reward);
    os << line;
  }
  if (!os) throw he::SerializationError("training log write failed");
}

}  // namespace enchvac::ctrl
