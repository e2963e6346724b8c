// Copyright 2026 The enchvac Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "enchvac/he/he.hpp"
#include "enchvac/nn/enc_nn.hpp"

namespace enchvac::ctrl {

using he::InvalidParams;

// Weights of the three networks. The actor maps state to control through a
// tanh hidden layer and a sigmoid output squash scaled by u_max; each critic
// maps cat(x, u) to a scalar through a sigmoid hidden layer.
struct ControllerWeights {
  Eigen::MatrixXd Wa1;   // d x n
  Eigen::MatrixXd Wa2;   // m x d
  Eigen::MatrixXd Wc1g;  // d x (n+m), critic 1 (signal G)
  Eigen::MatrixXd Wc2g;  // 1 x d
  Eigen::MatrixXd Wc1w;  // d x (n+m), critic 2 (value W)
  Eigen::MatrixXd Wc2w;  // 1 x d
  Eigen::VectorXd u_max;  // m, elementwise positive

  int n() const { return static_cast<int>(Wa1.cols()); }
  int m() const { return static_cast<int>(Wa2.rows()); }
  int d() const { return static_cast<int>(Wa1.rows()); }

  // Throws InvalidParams on non-finite entries, nonpositive u_max, or
  // inconsistent cross-matrix dimensions.
  void validate() const;
};

// Uniform init in [-1/sqrt(fan_in), +1/sqrt(fan_in)] per matrix, seeded.
ControllerWeights init_weights(int n, int m, int d, const Eigen::VectorXd& u_max,
                               uint64_t seed);

// Checkpoint file: magic, version, dims, six matrices, u_max. Little-endian.
void save_weights(const std::filesystem::path& path, const ControllerWeights& w);
ControllerWeights load_weights(const std::filesystem::path& path);

struct GrhdpConfig {
  double alpha = 0.95;  // discount of the internal signal recursion
  double gamma = 0.5;   // discount of the value recursion
  double zeta_a = 0.01;  // actor learning rate
  double zeta = 0.05;    // critic learning rate
  Eigen::MatrixXd D;     // n x n positive definite state cost
  Eigen::MatrixXd M;     // m x m positive definite control cost
  int epochs = 60;
  int hidden = 16;
  uint64_t seed = 1;

  // Training shape.
  int episode_len = 96;    // steps collected per epoch
  int inner_steps = 40;    // gradient steps per phase per epoch
  double explore_sigma = 0.1;  // exploration noise as a fraction of u_max

  // Throws InvalidParams unless alpha, gamma lie in [0,1], the rates are
  // positive, and D, M are symmetric with strictly positive eigenvalues.
  void validate(int n, int m) const;
};

// r(x, u) = x'Dx + u'Mu. Nonnegative for positive definite D, M.
double external_reward(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                       const GrhdpConfig& cfg);

enum class EvalMode {
  plain,       // exact tanh / sigmoid
  plain_poly,  // degree-5 polynomial activations, exact arithmetic
  encrypted,   // polynomial activations evaluated homomorphically
};

enum class CriticId { g, w };

// The polynomial stand-ins used by plain_poly and encrypted modes. The actor
// hidden layer uses tanh_poly and its output squash sigmoid_poly; the critics
// use sigmoid_poly in their hidden layer.
struct ActivationSet {
  nn::ActivationPoly tanh_poly;
  nn::ActivationPoly sigmoid_poly;

  // Least-squares fits on [-4, 4].
  static ActivationSet fitted();
};

// Actor forward pass. Plain mode returns u_max .* sigmoid(Wa2 tanh(Wa1 x)),
// elementwise inside [0, u_max]. The polynomial modes compute the hidden layer
// and the second matvec with polynomial semantics, then apply the sigmoid
// polynomial and clamp to [0, u_max] on the client side; encrypted mode runs
// the pre-squash part under encryption (depth 5, so it needs preset "deep-6")
// and decrypts before the squash. Requires d >= max(n, m) in encrypted mode.
Eigen::VectorXd actor_forward(const Eigen::VectorXd& x, const ControllerWeights& w,
                              EvalMode mode, const ActivationSet& acts,
                              const he::KeySet* keys = nullptr);

// Critic forward pass: S = Wc2 sigmoid(Wc1 cat(x, u)), a scalar. Encrypted
// mode concatenates two fresh ciphertexts (1 level) and runs the two-layer
// forward (5 levels); requires d >= n + m and preset depth >= 6.
double critic_forward(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                      CriticId which, const ControllerWeights& w, EvalMode mode,
                      const ActivationSet& acts, const he::KeySet* keys = nullptr);

// Bellman-style targets, evaluated with the passed weights in plain_poly mode
// (the training substrate). The caller freezes weights by snapshotting them.
//   critic1: r(x, u) + alpha * G(x_next, u_next)
//   critic2: r(x, u) + alpha * G(x_next, u_next) + gamma * W(x_next, u_next)
double critic1_target(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                      const Eigen::VectorXd& x_next, const Eigen::VectorXd& u_next,
                      const ControllerWeights& w, const GrhdpConfig& cfg,
                      const ActivationSet& acts);
double critic2_target(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                      const Eigen::VectorXd& x_next, const Eigen::VectorXd& u_next,
                      const ControllerWeights& w, const GrhdpConfig& cfg,
                      const ActivationSet& acts);

struct Transition {
  Eigen::VectorXd x, u, x_next, u_next;
};

// Gradients of the critic batch loss mean_i 1/2 (S(x_i,u_i) - target_i)^2
// with respect to (Wc1, Wc2) of the selected critic, targets held fixed.
// Forward semantics are plain_poly. Exposed so the finite-difference oracle
// can probe the exact loss surface the update steps descend.
struct CriticGrads {
  Eigen::MatrixXd g1;  // d x (n+m)
  Eigen::MatrixXd g2;  // 1 x d
  double loss = 0.0;
};
CriticGrads critic_loss_grads(CriticId which, std::span<const Transition> batch,
                              std::span<const double> targets,
                              const ControllerWeights& w, const ActivationSet& acts);

// Gradients of the actor batch loss mean_i 1/2 W(x_i, u(x_i))^2 with respect
// to (Wa1, Wa2), critic-2 weights frozen. The differentiated control is the
// clamped actuation path clamp(u_max .* sigmoid_poly(...), 0, u_max). Where
// the clamp saturates, backprop substitutes a straight-through 0.1 slope for
// the true zero subgradient, so a unit saturated by an early still-uninformed
// critic can recover. All polynomial derivatives in this chain are evaluated
// at pre-activations clamped to the fit interval; the quintic's off-interval
// derivative otherwise amplifies weight growth into a runaway the clamped
// control keeps invisible in the loss.
struct ActorGrads {
  Eigen::MatrixXd g1;  // d x n
  Eigen::MatrixXd g2;  // m x d
  double loss = 0.0;
};
ActorGrads actor_loss_grads(std::span<const Eigen::VectorXd> states,
                            const ControllerWeights& w, const ActivationSet& acts);

struct UpdateResult {
  double loss = 0.0;
};

// One SGD step on the selected critic. Targets are computed from the weights
// as passed in (frozen for the step), then the step is applied in place.
// Throws InvalidParams on an empty batch. A non-finite loss is returned as is;
// the training loop reacts by halving the rate.
UpdateResult update_critic(CriticId which, std::span<const Transition> batch,
                           ControllerWeights& w, const GrhdpConfig& cfg,
                           const ActivationSet& acts);

// One SGD step on the actor through the frozen critic 2.
UpdateResult update_actor(std::span<const Eigen::VectorXd> states,
                          ControllerWeights& w, const GrhdpConfig& cfg,
                          const ActivationSet& acts);

// Minimal plant access for model-free training: step semantics only.
class PlantInterface {
 public:
  virtual ~PlantInterface() = default;
  virtual Eigen::VectorXd reset(uint64_t seed) = 0;
  virtual Eigen::VectorXd step(const Eigen::VectorXd& u) = 0;
  virtual int state_dim() const = 0;
  virtual int control_dim() const = 0;
  virtual Eigen::VectorXd control_upper_bound() const = 0;
};

struct EpochLog {
  int epoch = 0;
  double l_c1 = 0.0;
  double l_c2 = 0.0;
  double l_o = 0.0;
  double mean_reward = 0.0;
};

struct TrainResult {
  ControllerWeights weights;
  std::vector<EpochLog> log;
  bool converged = false;
};

// Staged training: per epoch, collect one exploratory episode with the current
// actor, freeze targets, then run inner_steps gradient steps on critic 1, then
// critic 2, then the actor. Deterministic given cfg.seed. On a non-finite
// phase loss the epoch is rolled back and the corresponding rate halved; the
// halved rate persists for the rest of the run. An epoch that still diverges
// after five of its own retries aborts with InvalidParams. Stops early once
// the summed epoch loss changes by less than 1e-4 relative for ten
// consecutive epochs. epochs == 0 returns the initial weights.
TrainResult train_controller(PlantInterface& plant, const GrhdpConfig& cfg,
                             const ActivationSet& acts);

// CSV with header epoch,l_c1,l_c2,l_o,mean_reward.
void write_training_log(const std::filesystem::path& path,
                        std::span<const EpochLog> log);

}  // namespace enchvac::ctrl
