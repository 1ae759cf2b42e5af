#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "delaymatch/checkpoint.hpp"
#include "delaymatch/featurizer.hpp"
#include "delaymatch/mlp.hpp"
#include "delaymatch/replay.hpp"
#include "delaymatch/rewards.hpp"
#include "delaymatch/simulator.hpp"

namespace delaymatch {

/// Linear decay from `start` to `end` over `decay_epochs`, then flat.
struct EpsilonSchedule {
  double start = 1.0;
  double end = 0.05;
  int decay_epochs = 1000;

  double value(int epoch) const;
  void validate() const;
};

struct TrainingConfig {
  int epochs = 2000;                  // K
  int dqn_updates = 50;               // M1
  int a2c_updates = 50;               // M2
  std::size_t batch_size = 256;
  int target_sync_period = 100;       // in updates
  double q_learning_rate = 1e-4;      // β1, also used for the critic
  double actor_learning_rate = 1e-4;  // β2
  std::size_t replay_capacity = 100000;
  EpsilonSchedule epsilon{1.0, 0.05, 1000};
  double grad_clip_norm = 10.0;
  bool normalize_advantage = true;
  double tabular_alpha = 0.1;
  std::vector<Eigen::Index> hidden{512, 256, 128};
  RewardConfig reward;
  FeatureConfig features;
  std::uint64_t seed = 1;

  void validate() const;
};

using WorldFactory = std::function<WorldState(std::uint64_t seed)>;

struct EpochReport {
  int epoch = 0;
  EpisodeMetrics metrics;  // of the exploration episode
  double loss = 0.0;       // mean Q or critic loss over the epoch's updates
  double actor_loss = 0.0;
  int updates = 0;
  double epsilon = 0.0;
  std::size_t replay_size = 0;
};

enum class PolicyMode { explore, greedy };

/// Learner networks train in single precision; checkpoints hold doubles.
using NetScalar = float;
using NetParams = BasicMlpParams<NetScalar>;
using NetAdam = BasicAdamOptimizer<NetScalar>;

// ---- primitive operations -------------------------------------------------

/// ε-greedy over two Q outputs per row; equal values pick action 1.
template <typename T>
std::vector<int> dqn_act(const BasicMlpParams<T>& q, const MlpSpec& spec, const Eigen::MatrixXd& states,
                         double epsilon, Rng& rng);

/// y = r for terminal rows, r + γ·max_a' Q_target(s', a') otherwise.
template <typename T>
Eigen::VectorXd dqn_target(const TransitionBatch& batch, const BasicMlpParams<T>& q_target,
                           const MlpSpec& spec, double gamma);

/// Σ_a π(a|s)·[r + γ·V'(s')] evaluated term by term.
double a2c_value_target_literal(std::span<const double> policy, double r, bool done,
                                double v_next_target, double gamma);
/// The same target with Σ_a π(a|s) = 1 factored out.
double a2c_value_target(double r, bool done, double v_next_target, double gamma);
/// TD-error advantage r + γ·V'(s') − V(s); the bootstrap term is dropped when done.
double a2c_advantage(double r, bool done, double v_s, double v_next_target, double gamma);

template <typename T>
Eigen::VectorXd a2c_value_targets(const TransitionBatch& batch, const BasicMlpParams<T>& critic_target,
                                  const MlpSpec& critic_spec, double gamma);

/// Pairs each recorded state with its successor and backfilled reward.
struct RecordedInterval {
  int t = 0;
  std::vector<std::int64_t> request_ids;  // ascending, as in world.waiting()
  std::vector<AgentStateVector> states;
  std::vector<int> actions;
};

std::vector<Transition> build_transitions(const std::vector<RecordedInterval>& recorded,
                                          const EpisodeRewardLedger& ledger);

// ---- policies ---------------------------------------------------------------

/// Every waiting request enters the pool at every interval.
class PureOptimizationPolicy final : public JointPolicy {
 public:
  std::vector<int> act(const WorldState& world) override;
};

std::vector<int> pure_optimization_actions(std::size_t agents);

/// Shared machinery of the centralised neural learners: featurise the world,
/// pick joint actions, record states, and turn an episode into transitions.
class NeuralLearner : public JointPolicy {
 public:
  NeuralLearner(const TrainingConfig& cfg, int zones);

  std::vector<int> act(const WorldState& world) override;

  void set_mode(PolicyMode mode) { mode_ = mode; }
  PolicyMode mode() const { return mode_; }

  virtual EpochReport train_epoch(const WorldFactory& make_world, int epoch) = 0;
  virtual std::string name() const = 0;
  virtual Checkpoint checkpoint() const = 0;

  Eigen::Index state_dim() const { return state_dim_; }
  const ReplayMemory& replay() const { return replay_; }
  ReplayMemory& replay() { return replay_; }
  std::int64_t state_vectors_checked() const { return shape_checks_; }
  const TrainingConfig& config() const { return cfg_; }

  /// Runs one exploration episode and stores its transitions; returns metrics.
  EpisodeMetrics collect_episode(const WorldFactory& make_world);

 protected:
  virtual std::vector<int> choose(const Eigen::MatrixXd& states) = 0;

  TrainingConfig cfg_;
  int zones_;
  Eigen::Index state_dim_;
  Rng rng_;
  ReplayMemory replay_;
  PolicyMode mode_ = PolicyMode::explore;
  double epsilon_ = 1.0;
  std::vector<RecordedInterval> recorded_;
  bool recording_ = false;
  std::int64_t shape_checks_ = 0;
};

class DqnLearner final : public NeuralLearner {
 public:
  DqnLearner(const TrainingConfig& cfg, int zones);
  DqnLearner(const TrainingConfig& cfg, int zones, const Checkpoint& ckpt);

  EpochReport train_epoch(const WorldFactory& make_world, int epoch) override;
  std::string name() const override { return "dqn"; }
  Checkpoint checkpoint() const override;

  /// One minibatch step on the squared TD error; returns the loss.
  double update(std::span<const Transition* const> batch);
  void sync_target() { target_ = q_; }

  const MlpSpec& spec() const { return spec_; }
  const NetParams& q_params() const { return q_; }
  const NetParams& target_params() const { return target_; }
  void set_epsilon(double e) { epsilon_ = e; }

 protected:
  std::vector<int> choose(const Eigen::MatrixXd& states) override;

 private:
  MlpSpec spec_;
  NetParams q_;
  NetParams target_;
  NetAdam opt_;
  std::int64_t updates_ = 0;
};

class A2cLearner final : public NeuralLearner {
 public:
  A2cLearner(const TrainingConfig& cfg, int zones);
  A2cLearner(const TrainingConfig& cfg, int zones, const Checkpoint& ckpt);

  EpochReport train_epoch(const WorldFactory& make_world, int epoch) override;
  std::string name() const override { return "a2c"; }
  Checkpoint checkpoint() const override;

  struct UpdateLosses {
    double critic = 0.0;
    double actor = 0.0;
  };
  /// Critic step on the squared value error, then an actor step along
  /// ∇ log π(a|s)·A with A held constant.
  UpdateLosses update(std::span<const Transition* const> batch);
  void sync_target() { critic_target_ = critic_; }

  Eigen::MatrixXd policy(const Eigen::MatrixXd& states) const;
  Eigen::VectorXd value(const Eigen::MatrixXd& states) const;
  const MlpSpec& actor_spec() const { return actor_spec_; }
  const MlpSpec& critic_spec() const { return critic_spec_; }
  const NetParams& actor_params() const { return actor_; }
  const NetParams& critic_params() const { return critic_; }
  const NetParams& critic_target_params() const { return critic_target_; }

 protected:
  std::vector<int> choose(const Eigen::MatrixXd& states) override;

 private:
  MlpSpec actor_spec_;
  MlpSpec critic_spec_;
  NetParams actor_;
  NetParams critic_;
  NetParams critic_target_;
  NetAdam actor_opt_;
  NetAdam critic_opt_;
  std::int64_t updates_ = 0;
};

}  // namespace delaymatch
