// Copyright 2026 The enchvac Authors.
// SPDX-License-Identifier: Apache-2.0
#include "enchvac/trigger/event_trigger.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <string>

namespace enchvac::trigger {

namespace {

constexpr char kPolicyMagic[4] = {'E', 'T', 'P', '1'};
constexpr double kLogitClamp = 15.0;

void require(bool ok, const char* what) {
  if (!ok) throw InvalidParams(what);
}

void require_pd(const Eigen::MatrixXd& A, const char* name) {
  require(A.rows() == A.cols() && A.rows() > 0, "cost matrix must be square");
  double scale = std::max(1.0, A.cwiseAbs().maxCoeff());
  require((A - A.transpose()).cwiseAbs().maxCoeff() <= 1e-9 * scale,
          "cost matrix must be symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
  if (es.info() != Eigen::Success || es.eigenvalues().minCoeff() <= 0.0)
    throw InvalidParams(std::string(name) + " must be positive definite");
}

double quad(const Eigen::VectorXd& v, const Eigen::MatrixXd& A) {
  return v.dot(A * v);
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
    throw he::SerializationError("policy file: bad matrix header");
  Eigen::MatrixXd m(rows, cols);
  for (uint32_t i = 0; i < rows; ++i)
    for (uint32_t j = 0; j < cols; ++j) m(i, j) = read_f64(is);
  if (!is) throw he::SerializationError("policy file: truncated matrix data");
  return m;
}

Eigen::VectorXd raw_features(const AugmentedInfoState& s, const TriggerConfig& cfg) {
  Eigen::VectorXd f(2 * s.x.size() + 1);
  f << s.x - cfg.x_r, s.z - cfg.x_r,
      static_cast<double>(s.N) / static_cast<double>(cfg.t_s);
  return f;
}

void welford_update(TriggerPolicyWeights& w, const Eigen::VectorXd& raw) {
  w.feat_count += 1.0;
  Eigen::VectorXd delta = raw - w.feat_mean;
  w.feat_mean += delta / w.feat_count;
  w.feat_m2 += delta.cwiseProduct(raw - w.feat_mean);
}

Eigen::VectorXd normalize_features(const Eigen::VectorXd& raw,
                                   const TriggerPolicyWeights& w) {
  if (w.feat_count < 2.0) return raw - w.feat_mean;
  Eigen::VectorXd sd =
      (w.feat_m2 / (w.feat_count - 1.0)).cwiseMax(1e-12).cwiseSqrt().cwiseMax(1e-6);
  return (raw - w.feat_mean).cwiseQuotient(sd);
}

struct PolicyTrace {
  Eigen::VectorXd f;  // normalized features
  Eigen::VectorXd h;  // tanh hidden
  double p = 0.0;
};

PolicyTrace policy_forward(const AugmentedInfoState& s, const TriggerPolicyWeights& w,
                           const TriggerConfig& cfg) {
  require(w.W1.cols() == 2 * s.x.size() + 1,
          "trigger policy features do not match the state dim");
  PolicyTrace t;
  t.f = normalize_features(raw_features(s, cfg), w);
  t.h = (w.W1 * t.f + w.b1).array().tanh();
  double logit = std::clamp(w.w2.dot(t.h) + w.b2, -kLogitClamp, kLogitClamp);
  t.p = 1.0 / (1.0 + std::exp(-logit));
  return t;
}

struct DecisionTrace {
  Eigen::VectorXd f;  // features as seen by the policy at decision time
  int a = 0;
  double p = 0.0;
};

struct EpisodeTrace {
  EpisodeResult result;
  std::vector<DecisionTrace> decisions;  // non-forced decisions only
};

// Shared episode loop. stats, when non-null, receives Welford updates from
// every decision's raw features before the policy evaluates them; training
// passes the policy itself so normalization tracks the growing sample.
EpisodeTrace run_episode_impl(const TriggerPolicyWeights& pw,
                              TriggerPolicyWeights* stats,
                              const ctrl::ControllerWeights& cw,
                              const ctrl::ActivationSet& acts,
                              ctrl::PlantInterface& plant, const TriggerConfig& cfg,
                              util::Rng& rng, bool record_steps, bool collect) {
  EpisodeTrace tr;
  Eigen::VectorXd x0 = plant.reset(rng.next_u64());
  AugmentedInfoState s = initial_info_state(x0, plant.control_dim(), cfg.t_s);
  double total = 0.0;
  int triggers = 0;
  if (record_steps) tr.result.steps.reserve(cfg.horizon);
  for (int k = 0; k < cfg.horizon; ++k) {
    if (stats) welford_update(*stats, raw_features(s, cfg));
    PolicyTrace pt = policy_forward(s, pw, cfg);
    int a;
    bool forced = s.N >= cfg.t_s;
    if (forced)
      a = 1;
    else
      a = rng.next_double() < pt.p ? 1 : 0;
    Eigen::VectorXd u = a ? ctrl::actor_forward(s.x, cw, ctrl::EvalMode::plain_poly, acts)
                          : s.u_star;
    double c = stage_cost(s, a, u, cfg);
    total += c;
    triggers += a;
    if (collect && !forced) tr.decisions.push_back({pt.f, a, pt.p});
    if (record_steps)
      tr.result.steps.push_back(
          {k, a, static_cast<double>(triggers) / (k + 1), c, s.x, s.z, s.N});
    Eigen::VectorXd x_next;
    try {
      x_next = plant.step(u);
    } catch (const std::exception& e) {
      throw InvalidParams("plant fault at step " + std::to_string(k) + ": " + e.what());
    }
    s = info_update(s, a, x_next);
    if (a) s.u_star = u;
  }
  tr.result.total_cost = total + terminal_cost(s.x, cfg);
  tr.result.comm_rate = static_cast<double>(triggers) / cfg.horizon;
  tr.result.triggers = triggers;
  tr.result.x_end = s.x;
  return tr;
}

}  // namespace

AugmentedInfoState initial_info_state(const Eigen::VectorXd& x0, int m, int t_s) {
  require(m >= 1 && t_s >= 1, "initial info state needs m >= 1 and t_s >= 1");
  AugmentedInfoState s;
  s.x = x0;
  s.z = x0;
  s.N = t_s;
  s.u_star = Eigen::VectorXd::Zero(m);
  return s;
}

AugmentedInfoState info_update(const AugmentedInfoState& s, int a,
                               const Eigen::VectorXd& x_next) {
  require(a == 0 || a == 1, "trigger decision must be 0 or 1");
  require(s.z.size() == s.x.size() && x_next.size() == s.x.size(),
          "info state dims do not match");
  AugmentedInfoState out;
  out.x = x_next;
  out.z = a ? s.x : s.z;
  out.N = a ? 0 : s.N + 1;
  out.u_star = s.u_star;
  return out;
}

void TriggerConfig::validate(int n, int m) const {
  require(std::isfinite(beta) && beta >= 0.0, "beta must be finite and >= 0");
  require(t_s >= 1, "t_s must be >= 1");
  require(horizon >= 1, "horizon must be >= 1");
  require(hidden >= 1, "hidden width must be >= 1");
  require(std::isfinite(learning_rate) && learning_rate > 0.0,
          "learning rate must be positive");
  require(episodes >= 0, "episodes must be >= 0");
  require(Q.rows() == n && R.rows() == m, "cost matrices do not match plant dims");
  require(x_r.size() == n, "reference state does not match plant dims");
  require_pd(Q, "Q");
  require_pd(R, "R");
}

double stage_cost(const AugmentedInfoState& s, int a, const Eigen::VectorXd& u,
                  const TriggerConfig& cfg) {
  require(a == 0 || a == 1, "trigger decision must be 0 or 1");
  require(s.x.size() == cfg.Q.rows() && cfg.x_r.size() == cfg.Q.rows(),
          "state does not match Q");
  double c = quad(s.x - cfg.x_r, cfg.Q);
  if (a) {
    require(u.size() == cfg.R.rows(), "control does not match R");
    c += quad(u, cfg.R) + cfg.beta;
  } else {
    require(s.u_star.size() == cfg.R.rows(), "replayed control does not match R");
    c += quad(s.u_star, cfg.R);
  }
  return c;
}

double terminal_cost(const Eigen::VectorXd& x_end, const TriggerConfig& cfg) {
  require(x_end.size() == cfg.Q.rows() && cfg.x_r.size() == cfg.Q.rows(),
          "state does not match Q");
  return quad(x_end - cfg.x_r, cfg.Q);
}

void TriggerPolicyWeights::validate() const {
  require(W1.rows() >= 1 && W1.cols() >= 3 && W1.cols() % 2 == 1,
          "W1 must be hidden x (2n+1)");
  require(b1.size() == W1.rows() && w2.size() == W1.rows(),
          "layer dims do not match");
  require(feat_mean.size() == W1.cols() && feat_m2.size() == W1.cols(),
          "feature statistics do not match W1");
  bool finite = W1.allFinite() && b1.allFinite() && w2.allFinite() &&
                std::isfinite(b2) && feat_mean.allFinite() && feat_m2.allFinite() &&
                std::isfinite(feat_count);
  require(finite, "policy weights must be finite");
  require(feat_count >= 0.0 && feat_m2.minCoeff() >= 0.0,
          "feature statistics must be nonnegative");
}

TriggerPolicyWeights init_trigger_policy(int n, int hidden, uint64_t seed) {
  require(n >= 1 && hidden >= 1, "init needs n >= 1 and hidden >= 1");
  util::Rng rng(seed);
  TriggerPolicyWeights w;
  int f = 2 * n + 1;
  w.W1 = uniform_init(rng.derive("W1"), hidden, f);
  w.b1 = Eigen::VectorXd::Zero(hidden);
  w.w2 = uniform_init(rng.derive("w2"), hidden, 1).col(0) /
         std::sqrt(static_cast<double>(hidden));
  w.b2 = 0.0;
  w.feat_mean = Eigen::VectorXd::Zero(f);
  w.feat_m2 = Eigen::VectorXd::Zero(f);
  w.feat_count = 0.0;
  return w;
}

void save_trigger_policy(const std::filesystem::path& path,
                         const TriggerPolicyWeights& w) {
  w.validate();
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw he::SerializationError("cannot open policy file for writing");
  os.write(kPolicyMagic, 4);
  write_u32(os, 1);
  write_mat(os, w.W1);
  write_mat(os, w.b1);
  write_mat(os, w.w2);
  write_f64(os, w.b2);
  write_mat(os, w.feat_mean);
  write_mat(os, w.feat_m2);
  write_f64(os, w.feat_count);
  if (!os) throw he::SerializationError("policy file write failed");
}

TriggerPolicyWeights load_trigger_policy(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw he::SerializationError("cannot open policy file");
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kPolicyMagic, 4) != 0)
    throw he::SerializationError("policy file: bad magic");
  if (read_u32(is) != 1) throw he::SerializationError("policy file: bad version");
  TriggerPolicyWeights w;
  w.W1 = read_mat(is);
  w.b1 = read_mat(is).col(0);
  w.w2 = read_mat(is).col(0);
  w.b2 = read_f64(is);
  w.feat_mean = read_mat(is).col(0);
  w.feat_m2 = read_mat(is).col(0);
  w.feat_count = read_f64(is);
  if (!is) throw he::SerializationError("policy file: truncated");
  try {
    w.validate();
  } catch (const InvalidParams& e) {
    throw he::SerializationError(std::string("policy file: ") + e.what());
  }
  return w;
}

double trigger_probability(const AugmentedInfoState& s,
                           const TriggerPolicyWeights& w, const TriggerConfig& cfg) {
  require(cfg.t_s >= 1, "t_s must be >= 1");
  return policy_forward(s, w, cfg).p;
}

TriggerDecision policy_action(const AugmentedInfoState& s,
                              const TriggerPolicyWeights& w,
                              const TriggerConfig& cfg, util::Rng& rng) {
  require(cfg.t_s >= 1, "t_s must be >= 1");
  TriggerDecision d;
  d.p = policy_forward(s, w, cfg).p;
  if (s.N >= cfg.t_s) {
    d.a = 1;
    d.forced = true;
    d.log_prob = 0.0;
    return d;
  }
  d.a = rng.next_double() < d.p ? 1 : 0;
  d.log_prob = d.a ? std::log(d.p) : std::log1p(-d.p);
  return d;
}

EpisodeResult run_episode(const TriggerPolicyWeights& pw,
                          const ctrl::ControllerWeights& cw,
                          const ctrl::ActivationSet& acts,
                          ctrl::PlantInterface& plant, const TriggerConfig& cfg,
                          util::Rng& rng, bool record_steps) {
  cfg.validate(plant.state_dim(), plant.control_dim());
  pw.validate();
  cw.validate();
  require(pw.n() == plant.state_dim(), "policy does not match plant state dim");
  require(cw.n() == plant.state_dim() && cw.m() == plant.control_dim(),
          "controller does not match plant dims");
  return run_episode_impl(pw, nullptr, cw, acts, plant, cfg, rng, record_steps, false)
      .result;
}

TriggerTrainResult reinforce_train(const ctrl::ControllerWeights& cw,
                                   const ctrl::ActivationSet& acts,
                                   ctrl::PlantInterface& plant,
                                   const TriggerConfig& cfg) {
  const int n = plant.state_dim(), m = plant.control_dim();
  cfg.validate(n, m);
  cw.validate();
  require(cw.n() == n && cw.m() == m, "controller does not match plant dims");
  util::Rng base(cfg.seed);
  TriggerTrainResult out;
  out.weights = init_trigger_policy(n, cfg.hidden, base.derive("init").next_u64());
  out.log.reserve(cfg.episodes);
  TriggerPolicyWeights& w = out.weights;
  double lr = cfg.learning_rate;
  double baseline = 0.0;
  bool have_baseline = false;
  int episode_retries = 0;
  for (int e = 0; e < cfg.episodes; ++e) {
    TriggerPolicyWeights snap = w;
    auto rng = base.derive("episode", static_cast<uint64_t>(e));
    EpisodeTrace tr = run_episode_impl(w, &w, cw, acts, plant, cfg, rng, false, true);
    double ret = tr.result.total_cost;
    bool diverged = !std::isfinite(ret);
    if (!diverged) {
      // Gradient of E[return] via the likelihood ratio: each Bernoulli
      // decision contributes (a - p) through the logit; forced decisions
      // were never the policy's and are absent from the trace.
      double adv = have_baseline ? ret - baseline : 0.0;
      Eigen::MatrixXd gW1 = Eigen::MatrixXd::Zero(w.W1.rows(), w.W1.cols());
      Eigen::VectorXd gb1 = Eigen::VectorXd::Zero(w.b1.size());
      Eigen::VectorXd gw2 = Eigen::VectorXd::Zero(w.w2.size());
      double gb2 = 0.0;
      for (const auto& d : tr.decisions) {
        Eigen::VectorXd h = (w.W1 * d.f + w.b1).array().tanh();
        double gl = d.a - d.p;
        gb2 += gl;
        gw2 += gl * h;
        Eigen::VectorXd gpre =
            gl * w.w2.cwiseProduct((1.0 - h.array().square()).matrix());
        gb1 += gpre;
        gW1 += gpre * d.f.transpose();
      }
      w.W1 -= lr * adv * gW1;
      w.b1 -= lr * adv * gb1;
      w.w2 -= lr * adv * gw2;
      w.b2 -= lr * adv * gb2;
      diverged = !(w.W1.allFinite() && w.b1.allFinite() && w.w2.allFinite() &&
                   std::isfinite(w.b2));
    }
    if (diverged) {
      w = snap;
      if (++episode_retries > 5)
        throw InvalidParams("trigger training diverged after 5 rate halvings");
      lr *= 0.5;
      --e;
      continue;
    }
    episode_retries = 0;
    baseline = have_baseline ? 0.9 * baseline + 0.1 * ret : ret;
    have_baseline = true;
    out.log.push_back({e, ret, tr.result.comm_rate});
  }
  return out;
}

void write_trigger_log(const std::filesystem::path& path,
                       std::span<const TriggerEpisodeLog> log) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw he::SerializationError("cannot open trigger log for writing");
  os << "episode,cost,comm_rate\n";
  char line[96];
  for (const auto& e : log) {
    std::snprintf(line, sizeof line, "%d,%.9g,%.9g\n", e.episode, e.cost, e.comm_rate);
    os << line;
  }
  if (!os) throw he::SerializationError("trigger log write failed");
}

namespace {

void append_vec(std::string& s, const Eigen::VectorXd& v) {
  char buf[32];
  for (int i = 0; i < v.size(); ++i) {
    std::snprintf(buf, sizeof buf, i ? ";%.9g" : "%.9g", v(i));
    s += buf;
  }
}

}  // namespace

void write_episode_log(const std::filesystem::path& path, const EpisodeResult& ep) {
  require(!ep.steps.empty(), "episode log requires a recorded episode");
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw he::SerializationError("cannot open episode log for writing");
  os << "step,a,comm_rate_to_date,stage_cost,x,z,N\n";
  char head[64];
  for (const auto& r : ep.steps) {
    std::snprintf(head, sizeof head, "%d,%d,%.9g,%.9g,", r.k, r.a,
                  r.comm_rate_to_date, r.cost);
    std::string line = head;
    append_vec(line, r.x);
    line += ',';
    append_vec(line, r.z);
    line += ',' + std::to_string(r.N) + '\n';
    os << line;
  }
  if (!os) throw he::SerializationError("episode log write failed");
}

void DiscreteInstance::validate(const TriggerConfig& cfg) const {
  require(!states.empty() && controls.size() == states.size() &&
              trans.size() == states.size(),
          "instance tables must have one row per state");
  require(initial >= 0 && initial < static_cast<int>(states.size()),
          "initial state out of range");
  const auto S = static_cast<Eigen::Index>(states.size());
  const auto n = states[0].size(), m = controls[0].size();
  require(n >= 1 && m >= 1, "instance needs nonempty state and control vectors");
  for (const auto& s : states) require(s.size() == n, "state dims differ");
  for (const auto& c : controls) require(c.size() == m, "control dims differ");
  for (const auto& t : trans) {
    require(t.rows() == S && t.cols() == S, "transition tables must be |X| x |X|");
    require(t.minCoeff() >= 0.0, "transition probabilities must be nonnegative");
    for (Eigen::Index i = 0; i < S; ++i)
      require(std::abs(t.row(i).sum() - 1.0) <= 1e-9,
              "transition rows must sum to 1");
  }
  double aug = static_cast<double>(S) * static_cast<double>(S) * (cfg.t_s + 1);
  require(aug <= 1e4, "instance too large to enumerate");
}

DiscretePlant::DiscretePlant(const DiscreteInstance& inst)
    : inst_(inst), state_(inst.initial), rng_(0) {}

Eigen::VectorXd DiscretePlant::reset(uint64_t seed) {
  rng_ = util::Rng(seed);
  state_ = inst_.initial;
  return inst_.states[state_];
}

Eigen::VectorXd DiscretePlant::step(const Eigen::VectorXd& u) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (size_t j = 0; j < inst_.controls.size(); ++j) {
    double d = (u - inst_.controls[j]).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(j);
    }
  }
  double r = rng_.next_double(), acc = 0.0;
  int next = static_cast<int>(inst_.states.size()) - 1;
  for (Eigen::Index i = 0; i < inst_.trans[best].cols(); ++i) {
    acc += inst_.trans[best](state_, i);
    if (r < acc) {
      next = static_cast<int>(i);
      break;
    }
  }
  state_ = next;
  return inst_.states[state_];
}

int DiscretePlant::state_dim() const {
  return static_cast<int>(inst_.states[0].size());
}

int DiscretePlant::control_dim() const {
  return static_cast<int>(inst_.controls[0].size());
}

Eigen::VectorXd DiscretePlant::control_upper_bound() const {
  Eigen::VectorXd ub = inst_.controls[0];
  for (const auto& c : inst_.controls) ub = ub.cwiseMax(c);
  return ub;
}

DpResult::DpResult(int n_states, int t_s, int horizon)
    : s_(n_states),
      t_(t_s + 1),
      v_(static_cast<size_t>(horizon + 1) * n_states * n_states * (t_s + 1), 0.0),
      a_(static_cast<size_t>(horizon + 1) * n_states * n_states * (t_s + 1), 0) {}

int DpResult::idx(int k, int x, int z, int N) const {
  return ((k * s_ + x) * s_ + z) * t_ + N;
}

double& DpResult::value(int k, int x, int z, int N) { return v_[idx(k, x, z, N)]; }
double DpResult::value(int k, int x, int z, int N) const { return v_[idx(k, x, z, N)]; }
int8_t& DpResult::action(int k, int x, int z, int N) { return a_[idx(k, x, z, N)]; }
int DpResult::action(int k, int x, int z, int N) const { return a_[idx(k, x, z, N)]; }

DpResult value_recursion_oracle(const DiscreteInstance& inst,
                                const TriggerConfig& cfg) {
  inst.validate(cfg);
  const int S = static_cast<int>(inst.states.size());
  const int n = static_cast<int>(inst.states[0].size());
  const int m = static_cast<int>(inst.controls[0].size());
  cfg.validate(n, m);
  const int H = cfg.horizon, T = cfg.t_s;
  std::vector<double> dev(S), rc(S);
  for (int i = 0; i < S; ++i) {
    dev[i] = quad(inst.states[i] - cfg.x_r, cfg.Q);
    rc[i] = quad(inst.controls[i], cfg.R);
  }
  DpResult out(S, T, H);
  for (int x = 0; x < S; ++x) {
    double tc = terminal_cost(inst.states[x], cfg);
    for (int z = 0; z < S; ++z)
      for (int N = 0; N <= T; ++N) out.value(H, x, z, N) = tc;
  }
  for (int k = H - 1; k >= 0; --k) {
    for (int x = 0; x < S; ++x) {
      for (int z = 0; z < S; ++z) {
        for (int N = 0; N <= T; ++N) {
          double e1 = 0.0;
          for (int xn = 0; xn < S; ++xn)
            e1 += inst.trans[x](x, xn) * out.value(k + 1, xn, x, 0);
          double q1 = dev[x] + rc[x] + cfg.beta + e1;
          double best = q1;
          int8_t act = 1;
          if (N < T) {
            double e0 = 0.0;
            for (int xn = 0; xn < S; ++xn)
              e0 += inst.trans[z](x, xn) * out.value(k + 1, xn, z, N + 1);
            double q0 = dev[x] + rc[z] + e0;
            // Ties keep the channel silent.
            if (q0 <= q1) {
              best = q0;
              act = 0;
            }
          }
          out.value(k, x, z, N) = best;
          out.action(k, x, z, N) = act;
        }
      }
    }
  }
  out.optimal_cost = out.value(0, inst.initial, inst.initial, T);
  return out;
}

}  // namespace enchvac::trigger
