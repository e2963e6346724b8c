// Copyright 2026 The enchvac Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "enchvac/ctrl/grhdp.hpp"
#include "enchvac/util/rng.hpp"

namespace enchvac::trigger {

using he::InvalidParams;

// Client-side information state of the event-triggered loop: the current
// plant state x, the last communicated state z, the skip counter N (number of
// consecutive non-communication decisions since the last trigger), and the
// control u_star computed at the last trigger, which the actuator replays
// while no communication happens.
struct AugmentedInfoState {
  Eigen::VectorXd x;
  Eigen::VectorXd z;
  int N = 0;
  Eigen::VectorXd u_star;
};

// z = x0 and N = t_s, so the first decision of an episode is always a forced
// trigger; u_star starts as a zero placeholder that the forced first trigger
// overwrites before anything can apply it.
AugmentedInfoState initial_info_state(const Eigen::VectorXd& x0, int m, int t_s);

// Transition of the information state under decision a:
//   z' = (1-a) z + a x,  N' = (1-a)(N+1),  x' = x_next.
// Pure in (s, a, x_next); u_star is carried unchanged (the episode loop
// rewrites it when a = 1, since this update does not see the control).
AugmentedInfoState info_update(const AugmentedInfoState& s, int a,
                               const Eigen::VectorXd& x_next);

struct TriggerConfig {
  double beta = 6.9;  // communication penalty per trigger
  int t_s = 8;        // forced-trigger threshold on the skip counter
  Eigen::MatrixXd Q;  // n x n positive definite state cost
  Eigen::MatrixXd R;  // m x m positive definite control cost
  Eigen::VectorXd x_r;  // reference state
  int horizon = 96;     // decisions per episode
  int hidden = 16;      // trigger policy hidden width
  double learning_rate = 0.05;
  int episodes = 400;
  uint64_t seed = 1;

  // Throws InvalidParams unless beta >= 0, t_s >= 1, horizon >= 1, Q and R
  // are positive definite with matching dims, and the rate is positive.
  void validate(int n, int m) const;
};

// Stage cost of one decision:
//   (x - x_r)' Q (x - x_r) + (1-a) u_star' R u_star + a u' R u + beta a.
// The skipped branch charges the replayed control u_star, the triggered
// branch charges the freshly computed u plus the communication penalty.
// Throws InvalidParams on dimension mismatch or a outside {0, 1}.
double stage_cost(const AugmentedInfoState& s, int a, const Eigen::VectorXd& u,
                  const TriggerConfig& cfg);

// (x - x_r)' Q (x - x_r); zero exactly at the reference.
double terminal_cost(const Eigen::VectorXd& x_end, const TriggerConfig& cfg);

// Two fully connected layers over the features (x - x_r, z - x_r, N/T_s),
// each feature standardized by Welford statistics accumulated during
// training and frozen afterwards. The output logit is clamped to [-15, 15]
// before the sigmoid so the probability stays strictly inside (0, 1) in
// double precision.
struct TriggerPolicyWeights {
  Eigen::MatrixXd W1;  // hidden x (2n+1)
  Eigen::VectorXd b1;  // hidden
  Eigen::VectorXd w2;  // hidden
  double b2 = 0.0;

  Eigen::VectorXd feat_mean;  // 2n+1
  Eigen::VectorXd feat_m2;    // 2n+1, sum of squared deviations
  double feat_count = 0.0;

  int n() const { return static_cast<int>((W1.cols() - 1) / 2); }
  int hidden() const { return static_cast<int>(W1.rows()); }

  // Throws InvalidParams on non-finite entries or inconsistent dims.
  void validate() const;
};

// Uniform init in [-1/sqrt(fan_in), +1/sqrt(fan_in)], zero biases, identity
// feature statistics; the initial policy triggers with probability ~1/2.
TriggerPolicyWeights init_trigger_policy(int n, int hidden, uint64_t seed);

// Checkpoint file: magic, version, layers, feature statistics. Little-endian.
void save_trigger_policy(const std::filesystem::path& path,
                         const TriggerPolicyWeights& w);
TriggerPolicyWeights load_trigger_policy(const std::filesystem::path& path);

// Trigger probability of the policy at s, before the forced override.
double trigger_probability(const AugmentedInfoState& s,
                           const TriggerPolicyWeights& w, const TriggerConfig& cfg);

struct TriggerDecision {
  int a = 0;
  double log_prob = 0.0;  // log pi(a|s); 0 for forced decisions
  bool forced = false;
  double p = 0.0;  // trigger probability before the override
};

// Samples a ~ Bernoulli(p(s)). When s.N >= t_s the decision is overridden to
// a forced a = 1 that carries no log-probability: the policy gradient never
// sees decisions the constraint made for it.
TriggerDecision policy_action(const AugmentedInfoState& s,
                              const TriggerPolicyWeights& w,
                              const TriggerConfig& cfg, util::Rng& rng);

struct TriggerStepRecord {
  int k = 0;
  int a = 0;
  double comm_rate_to_date = 0.0;
  double cost = 0.0;  // stage cost of this decision
  Eigen::VectorXd x;
  Eigen::VectorXd z;
  int N = 0;
};

struct EpisodeResult {
  double total_cost = 0.0;  // sum of stage costs plus terminal cost
  double comm_rate = 0.0;
  int triggers = 0;
  Eigen::VectorXd x_end;  // state the terminal cost was charged on
  std::vector<TriggerStepRecord> steps;  // filled when record_steps
};

// Simulates one episode of cfg.horizon decisions against the frozen
// controller: a trigger transmits x, runs the actor in plain_poly mode and
// actuates its output; a skip replays u_star. The plant is reset from the
// passed stream, so distinct streams give independent episodes and an equal
// stream replays one exactly. A plant fault is rethrown with the step index.
EpisodeResult run_episode(const TriggerPolicyWeights& pw,
                          const ctrl::ControllerWeights& cw,
                          const ctrl::ActivationSet& acts,
                          ctrl::PlantInterface& plant, const TriggerConfig& cfg,
                          util::Rng& rng, bool record_steps = false);

struct TriggerEpisodeLog {
  int episode = 0;
  double cost = 0.0;
  double comm_rate = 0.0;
};

struct TriggerTrainResult {
  TriggerPolicyWeights weights;
  std::vector<TriggerEpisodeLog> log;
};

// REINFORCE on episode returns with a moving-average baseline, the
// controller frozen throughout. Deterministic given cfg.seed. A non-finite
// episode return or update rolls the episode back and halves the rate; the
// halved rate persists, and an episode that still diverges after five of its
// own retries aborts with InvalidParams. Feature statistics accumulate over
// training decisions and are frozen in the returned weights.
TriggerTrainResult reinforce_train(const ctrl::ControllerWeights& cw,
                                   const ctrl::ActivationSet& acts,
                                   ctrl::PlantInterface& plant,
                                   const TriggerConfig& cfg);

// CSV with header episode,cost,comm_rate.
void write_trigger_log(const std::filesystem::path& path,
                       std::span<const TriggerEpisodeLog> log);

// CSV with header step,a,comm_rate_to_date,stage_cost,x,z,N; vector-valued
// columns join their components with ';'. Requires a recorded episode.
void write_episode_log(const std::filesystem::path& path, const EpisodeResult& ep);

// A finite-state stand-in for the building: states[i] are the enumerated
// plant states, controls[j] is the frozen controller's output at states[j]
// (so a stale z replays controls[z]), and trans[j] row i gives the successor
// distribution of state i under controls[j]. Small enough instances admit
// exact value recursion over the augmented state (x, z, N).
struct DiscreteInstance {
  std::vector<Eigen::VectorXd> states;
  std::vector<Eigen::VectorXd> controls;
  std::vector<Eigen::MatrixXd> trans;  // trans[j](i, i') = P(i -> i' | controls[j])
  int initial = 0;

  // Throws InvalidParams unless sizes agree, rows are distributions, and the
  // augmented state space |X|^2 (t_s + 1) has at most 10^4 members.
  void validate(const TriggerConfig& cfg) const;
};

// PlantInterface view of a DiscreteInstance. Incoming controls are matched
// to the nearest enumerated control vector, which is exact when the caller
// computes them with the same frozen controller that filled the instance.
class DiscretePlant final : public ctrl::PlantInterface {
 public:
  explicit DiscretePlant(const DiscreteInstance& inst);
  Eigen::VectorXd reset(uint64_t seed) override;
  Eigen::VectorXd step(const Eigen::VectorXd& u) override;
  int state_dim() const override;
  int control_dim() const override;
  Eigen::VectorXd control_upper_bound() const override;
  int state_index() const { return state_; }

 private:
  const DiscreteInstance& inst_;
  int state_ = 0;
  util::Rng rng_;
};

// Exact finite-horizon values of the triggering problem on a discrete
// instance, by backward induction over the augmented state (x, z, N) with
// the same mechanics as run_episode: decisions k = 0..H-1 starting from
// (initial, z = initial, N = t_s), expectation taken over the transition
// rows, terminal cost after the last decision. Test oracle only.
class DpResult {
 public:
  DpResult(int n_states, int t_s, int horizon);
  double& value(int k, int x, int z, int N);
  double value(int k, int x, int z, int N) const;
  int8_t& action(int k, int x, int z, int N);
  int action(int k, int x, int z, int N) const;
  // V at the initial augmented state.
  double optimal_cost = 0.0;

 private:
  int idx(int k, int x, int z, int N) const;
  int s_, t_;
  std::vector<double> v_;
  std::vector<int8_t> a_;
};

DpResult value_recursion_oracle(const DiscreteInstance& inst,
                                const TriggerConfig& cfg);

}  // namespace enchvac::trigger
