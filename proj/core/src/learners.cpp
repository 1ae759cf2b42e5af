#include "delaymatch/learners.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <stdexcept>
#include <unordered_map>

namespace delaymatch {

double EpsilonSchedule::value(int epoch) const {
  if (decay_epochs <= 0 || epoch >= decay_epochs) return end;
  const double frac = static_cast<double>(std::max(epoch, 0)) / decay_epochs;
  return start + (end - start) * frac;
}

void EpsilonSchedule::validate() const {
  if (!(start >= end && end >= 0.0 && start <= 1.0))
    throw std::invalid_argument("epsilon schedule: need 1 >= start >= end >= 0");
}

void TrainingConfig::validate() const {
  if (epochs < 1 || dqn_updates < 1 || a2c_updates < 1 || batch_size < 1 ||
      target_sync_period < 1 || replay_capacity < 1)
    throw std::invalid_argument("training: counts must be positive");
  if (!(q_learning_rate > 0.0) || !(actor_learning_rate > 0.0) || !(tabular_alpha > 0.0))
    throw std::invalid_argument("training: learning rates must be positive");
  epsilon.validate();
  reward.validate();
  if (!(features.count_scale > 0.0)) throw std::invalid_argument("training: count_scale must be positive");
}

// ---- primitives -------------------------------------------------------------

template <typename T>
std::vector<int> dqn_act(const BasicMlpParams<T>& q, const MlpSpec& spec, const Eigen::MatrixXd& states,
                         double epsilon, Rng& rng) {
  std::vector<int> actions(static_cast<std::size_t>(states.rows()), 1);
  if (states.rows() == 0) return actions;
  const MatrixX<T> values = predict<T>(q, spec, states.cast<T>());
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::bernoulli_distribution coin(0.5);
  for (Eigen::Index i = 0; i < states.rows(); ++i) {
    if (epsilon > 0.0 && unit(rng) < epsilon)
      actions[static_cast<std::size_t>(i)] = coin(rng) ? 1 : 0;
    else
      actions[static_cast<std::size_t>(i)] = values(i, 1) >= values(i, 0) ? 1 : 0;
  }
  return actions;
}

template <typename T>
Eigen::VectorXd dqn_target(const TransitionBatch& batch, const BasicMlpParams<T>& q_target,
                           const MlpSpec& spec, double gamma) {
  const Eigen::MatrixXd next = predict<T>(q_target, spec, batch.next_states.cast<T>()).template cast<double>();
  Eigen::VectorXd y(batch.rewards.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    y(i) = batch.done(i) > 0.5 ? batch.rewards(i) : batch.rewards(i) + gamma * next.row(i).maxCoeff();
  }
  return y;
}

double a2c_value_target_literal(std::span<const double> policy, double r, bool done,
                                double v_next_target, double gamma) {
  double total = 0.0;
  for (double p : policy) total += p * (done ? r : r + gamma * v_next_target);
  return total;
}

double a2c_value_target(double r, bool done, double v_next_target, double gamma) {
  return done ? r : r + gamma * v_next_target;
}

double a2c_advantage(double r, bool done, double v_s, double v_next_target, double gamma) {
  return a2c_value_target(r, done, v_next_target, gamma) - v_s;
}

template <typename T>
Eigen::VectorXd a2c_value_targets(const TransitionBatch& batch, const BasicMlpParams<T>& critic_target,
                                  const MlpSpec& critic_spec, double gamma) {
  const Eigen::MatrixXd next =
      predict<T>(critic_target, critic_spec, batch.next_states.cast<T>()).template cast<double>();
  Eigen::VectorXd y(batch.rewards.size());
  for (Eigen::Index i = 0; i < y.size(); ++i)
    y(i) = a2c_value_target(batch.rewards(i), batch.done(i) > 0.5, next(i, 0), gamma);
  return y;
}

template std::vector<int> dqn_act<double>(const MlpParams&, const MlpSpec&, const Eigen::MatrixXd&, double, Rng&);
template std::vector<int> dqn_act<float>(const NetParams&, const MlpSpec&, const Eigen::MatrixXd&, double, Rng&);
template Eigen::VectorXd dqn_target<double>(const TransitionBatch&, const MlpParams&, const MlpSpec&, double);
template Eigen::VectorXd dqn_target<float>(const TransitionBatch&, const NetParams&, const MlpSpec&, double);
template Eigen::VectorXd a2c_value_targets<double>(const TransitionBatch&, const MlpParams&, const MlpSpec&, double);
template Eigen::VectorXd a2c_value_targets<float>(const TransitionBatch&, const NetParams&, const MlpSpec&, double);

std::vector<Transition> build_transitions(const std::vector<RecordedInterval>& recorded,
                                          const EpisodeRewardLedger& ledger) {
  struct Terminal {
    int interval;
    double reward;
  };
  std::unordered_map<std::int64_t, Terminal> terminal;
  for (const auto& e : ledger.entries()) terminal[e.agent.id] = {e.agent.terminal_interval, e.blended};

  std::vector<Transition> out;
  for (std::size_t k = 0; k < recorded.size(); ++k) {
    const auto& cur = recorded[k];
    for (std::size_t j = 0; j < cur.request_ids.size(); ++j) {
      const auto it = terminal.find(cur.request_ids[j]);
      if (it == terminal.end()) throw std::logic_error("build_transitions: agent missing from ledger");
      Transition tr;
      tr.s = cur.states[j];
      tr.a = cur.actions[j];
      tr.t = cur.t;
      tr.done = cur.t == it->second.interval;
      tr.r = tr.done ? it->second.reward : 0.0;
      if (!tr.done) {
        if (k + 1 >= recorded.size()) throw std::logic_error("build_transitions: agent outlived episode");
        const auto& nxt = recorded[k + 1];
        const auto pos = std::lower_bound(nxt.request_ids.begin(), nxt.request_ids.end(), cur.request_ids[j]);
        if (pos == nxt.request_ids.end() || *pos != cur.request_ids[j])
          throw std::logic_error("build_transitions: non-terminal agent missing in next interval");
        tr.s_next = nxt.states[static_cast<std::size_t>(pos - nxt.request_ids.begin())];
      }
      out.push_back(std::move(tr));
    }
  }
  return out;
}

// ---- policies -----------------------------------------------------------------

std::vector<int> pure_optimization_actions(std::size_t agents) { return std::vector<int>(agents, 1); }

std::vector<int> PureOptimizationPolicy::act(const WorldState& world) {
  return pure_optimization_actions(world.waiting().size());
}

NeuralLearner::NeuralLearner(const TrainingConfig& cfg, int zones)
    : cfg_(cfg), zones_(zones), state_dim_(AgentStateVector::dimension(zones)), rng_(cfg.seed),
      replay_(cfg.replay_capacity) {
  cfg_.validate();
}

std::vector<int> NeuralLearner::act(const WorldState& world) {
  if (world.area().zone_count() != zones_)
    throw std::invalid_argument("learner built for " + std::to_string(zones_) +
                                " zones used on a world with " +
                                std::to_string(world.area().zone_count()));
  const JointState joint = assemble_joint_state(world, cfg_.features);
  for (const auto& s : joint.agents) {
    if (s.size() != state_dim_)
      throw std::logic_error("state vector has " + std::to_string(s.size()) + " entries, expected " +
                             std::to_string(state_dim_));
    ++shape_checks_;
  }
  std::vector<int> actions = joint.agents.empty() ? std::vector<int>{} : choose(joint.matrix());
  if (recording_) {
    RecordedInterval rec;
    rec.t = world.t();
    for (const auto& r : world.waiting()) rec.request_ids.push_back(r.id);
    rec.states = joint.agents;
    rec.actions = actions;
    recorded_.push_back(std::move(rec));
  }
  return actions;
}

EpisodeMetrics NeuralLearner::collect_episode(const WorldFactory& make_world) {
  const PolicyMode saved = mode_;
  mode_ = PolicyMode::explore;
  recorded_.clear();
  recording_ = true;
  WorldState world = make_world(rng_());
  const EpisodeResult episode = run_episode(world, *this);
  recording_ = false;
  mode_ = saved;
  const EpisodeRewardLedger ledger = make_ledger(episode.agents, cfg_.reward);
  for (auto& tr : build_transitions(recorded_, ledger)) replay_.push(std::move(tr));
  recorded_.clear();
  return summarize_episode(episode, ledger);
}

// ---- DQN ------------------------------------------------------------------------

namespace {

MlpSpec make_spec(const TrainingConfig& cfg, Eigen::Index input, Eigen::Index output, OutputHead head) {
  MlpSpec s;
  s.input_dim = input;
  s.hidden = cfg.hidden;
  s.output_dim = output;
  s.head = head;
  return s;
}

void check_network(const NamedNetwork& net, const MlpSpec& want) {
  if (!(net.spec == want))
    throw std::runtime_error("checkpoint network '" + net.name + "' does not match the configured architecture");
}

}  // namespace

DqnLearner::DqnLearner(const TrainingConfig& cfg, int zones)
    : NeuralLearner(cfg, zones), spec_(make_spec(cfg, state_dim_, 2, OutputHead::linear)),
      q_(init_params(spec_, rng_).cast<NetScalar>()), target_(q_), opt_(spec_, cfg.q_learning_rate) {}

DqnLearner::DqnLearner(const TrainingConfig& cfg, int zones, const Checkpoint& ckpt)
    : DqnLearner(cfg, zones) {
  const auto& net = ckpt.network("q");
  spec_.hidden = net.spec.hidden;
  check_network(net, spec_);
  q_ = net.params.cast<NetScalar>();
  target_ = q_;
  opt_ = NetAdam(spec_, cfg.q_learning_rate);
}

std::vector<int> DqnLearner::choose(const Eigen::MatrixXd& states) {
  return dqn_act(q_, spec_, states, mode_ == PolicyMode::explore ? epsilon_ : 0.0, rng_);
}

double DqnLearner::update(std::span<const Transition* const> batch) {
  const TransitionBatch b = materialize(batch, state_dim_);
  const Eigen::VectorXd y = dqn_target(b, target_, spec_, cfg_.reward.gamma);
  const auto cache = forward<NetScalar>(q_, spec_, b.states.cast<NetScalar>());
  const auto n = static_cast<double>(b.rewards.size());
  MatrixX<NetScalar> grad = MatrixX<NetScalar>::Zero(cache.output.rows(), cache.output.cols());
  double loss = 0.0;
  for (Eigen::Index i = 0; i < grad.rows(); ++i) {
    const double diff = static_cast<double>(cache.output(i, b.actions(i))) - y(i);
    loss += diff * diff / n;
    grad(i, b.actions(i)) = static_cast<NetScalar>(2.0 * diff / n);
  }
  NetParams g = backward<NetScalar>(q_, spec_, cache, grad);
  clip_global_norm(g, cfg_.grad_clip_norm);
  if (apply_update(q_, g, opt_) == UpdateStatus::rejected_non_finite)
    std::cerr << "dqn: skipped update with non-finite gradient\n";
  if (++updates_ % cfg_.target_sync_period == 0) sync_target();
  return loss;
}

EpochReport DqnLearner::train_epoch(const WorldFactory& make_world, int epoch) {
  EpochReport rep;
  rep.epoch = epoch;
  epsilon_ = cfg_.epsilon.value(epoch);
  rep.epsilon = epsilon_;
  rep.metrics = collect_episode(make_world);
  if (replay_.size() >= cfg_.batch_size) {
    for (int m = 0; m < cfg_.dqn_updates; ++m) {
      const auto batch = replay_.sample(cfg_.batch_size, rng_);
      rep.loss += update(batch);
      ++rep.updates;
    }
    rep.loss /= rep.updates;
  }
  rep.replay_size = replay_.size();
  return rep;
}

Checkpoint DqnLearner::checkpoint() const {
  return {"dqn", {{"q", spec_, q_.cast<double>()}}};
}

// ---- A2C ------------------------------------------------------------------------

A2cLearner::A2cLearner(const TrainingConfig& cfg, int zones)
    : NeuralLearner(cfg, zones),
      actor_spec_(make_spec(cfg, state_dim_, 2, OutputHead::softmax)),
      critic_spec_(make_spec(cfg, state_dim_, 1, OutputHead::linear)),
      actor_(init_params(actor_spec_, rng_, 0.01).cast<NetScalar>()),
      critic_(init_params(critic_spec_, rng_).cast<NetScalar>()),
      critic_target_(critic_),
      actor_opt_(actor_spec_, cfg.actor_learning_rate),
      critic_opt_(critic_spec_, cfg.q_learning_rate) {}

A2cLearner::A2cLearner(const TrainingConfig& cfg, int zones, const Checkpoint& ckpt)
    : A2cLearner(cfg, zones) {
  const auto& actor = ckpt.network("actor");
  const auto& critic = ckpt.network("critic");
  actor_spec_.hidden = actor.spec.hidden;
  critic_spec_.hidden = critic.spec.hidden;
  check_network(actor, actor_spec_);
  check_network(critic, critic_spec_);
  actor_ = actor.params.cast<NetScalar>();
  critic_ = critic.params.cast<NetScalar>();
  critic_target_ = critic_;
  actor_opt_ = NetAdam(actor_spec_, cfg.actor_learning_rate);
  critic_opt_ = NetAdam(critic_spec_, cfg.q_learning_rate);
}

Eigen::MatrixXd A2cLearner::policy(const Eigen::MatrixXd& states) const {
  return predict<NetScalar>(actor_, actor_spec_, states.cast<NetScalar>()).cast<double>();
}

Eigen::VectorXd A2cLearner::value(const Eigen::MatrixXd& states) const {
  return predict<NetScalar>(critic_, critic_spec_, states.cast<NetScalar>()).col(0).cast<double>();
}

std::vector<int> A2cLearner::choose(const Eigen::MatrixXd& states) {
  const Eigen::MatrixXd probs = policy(states);
  std::vector<int> actions(static_cast<std::size_t>(states.rows()), 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    if (mode_ == PolicyMode::explore)
      actions[static_cast<std::size_t>(i)] = unit(rng_) < probs(i, 1) ? 1 : 0;
    else
      actions[static_cast<std::size_t>(i)] = probs(i, 1) >= probs(i, 0) ? 1 : 0;
  }
  return actions;
}

A2cLearner::UpdateLosses A2cLearner::update(std::span<const Transition* const> batch) {
  UpdateLosses losses;
  const TransitionBatch b = materialize(batch, state_dim_);
  const auto n = static_cast<double>(b.rewards.size());
  const Eigen::VectorXd y = a2c_value_targets(b, critic_target_, critic_spec_, cfg_.reward.gamma);

  const MatrixX<NetScalar> states = b.states.cast<NetScalar>();
  {
    const auto cache = forward<NetScalar>(critic_, critic_spec_, states);
    const Eigen::VectorXd diff = cache.output.col(0).cast<double>() - y;
    losses.critic = diff.squaredNorm() / n;
    const MatrixX<NetScalar> grad = ((2.0 / n) * diff).cast<NetScalar>();
    NetParams g = backward<NetScalar>(critic_, critic_spec_, cache, grad);
    clip_global_norm(g, cfg_.grad_clip_norm);
    if (apply_update(critic_, g, critic_opt_) == UpdateStatus::rejected_non_finite)
      std::cerr << "a2c: skipped critic update with non-finite gradient\n";
  }

  Eigen::VectorXd adv = y - predict<NetScalar>(critic_, critic_spec_, states).col(0).cast<double>();
  if (cfg_.normalize_advantage && adv.size() > 1) {
    const double mean = adv.mean();
    const double sd = std::sqrt((adv.array() - mean).square().sum() / static_cast<double>(adv.size()));
    adv = (adv.array() - mean) / (sd + 1e-8);
  }

  const auto cache = forward<NetScalar>(actor_, actor_spec_, states);
  MatrixX<NetScalar> grad_logits(cache.output.rows(), 2);
  for (Eigen::Index i = 0; i < grad_logits.rows(); ++i) {
    const int a = b.actions(i);
    const double p_a = std::max(static_cast<double>(cache.output(i, a)), 1e-30);
    losses.actor -= std::log(p_a) * adv(i) / n;
    // d/dz of −A·log softmax(z)_a = −A·(e_a − p)
    for (int k = 0; k < 2; ++k)
      grad_logits(i, k) =
          static_cast<NetScalar>(-adv(i) * ((k == a ? 1.0 : 0.0) - static_cast<double>(cache.output(i, k))) / n);
  }
  NetParams g = backward<NetScalar>(actor_, actor_spec_, cache, grad_logits, GradientAt::logits);
  clip_global_norm(g, cfg_.grad_clip_norm);
  if (apply_update(actor_, g, actor_opt_) == UpdateStatus::rejected_non_finite)
    std::cerr << "a2c: skipped actor update with non-finite gradient\n";

  if (++updates_ % cfg_.target_sync_period == 0) sync_target();
  return losses;
}

EpochReport A2cLearner::train_epoch(const WorldFactory& make_world, int epoch) {
  EpochReport rep;
  rep.epoch = epoch;
  rep.metrics = collect_episode(make_world);
  if (replay_.size() >= cfg_.batch_size) {
    for (int m = 0; m < cfg_.a2c_updates; ++m) {
      const auto batch = replay_.sample(cfg_.batch_size, rng_);
      const auto l = update(batch);
      rep.loss += l.critic;
      rep.actor_loss += l.actor;
      ++rep.updates;
    }
    rep.loss /= rep.updates;
    rep.actor_loss /= rep.updates;
  }
  rep.replay_size = replay_.size();
  return rep;
}

Checkpoint A2cLearner::checkpoint() const {
  return {"a2c", {{"actor", actor_spec_, actor_.cast<double>()}, {"critic", critic_spec_, critic_.cast<double>()}}};
}

}  // namespace delaymatch
