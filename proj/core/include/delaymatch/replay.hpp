#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <span>
#include <vector>

#include "delaymatch/featurizer.hpp"
#include "delaymatch/geometry.hpp"

namespace delaymatch {

/// One agent-step (s, a, r, s', done). Terminal transitions carry an empty
/// s_next which materialises as a zero row.
struct Transition {
  AgentStateVector s;
  int a = 1;
  double r = 0.0;
  AgentStateVector s_next;
  bool done = false;
  int t = 0;
};

/// Bounded FIFO of transitions shared by every agent.
class ReplayMemory {
 public:
  explicit ReplayMemory(std::size_t capacity);

  void push(Transition t);
  std::size_t size() const { return size_; }
  std::size_t capacity() const { return buffer_.size(); }
  /// Oldest first.
  const Transition& at(std::size_t k) const;

  /// `n` distinct transitions drawn uniformly; n must not exceed size().
  std::vector<const Transition*> sample(std::size_t n, Rng& rng) const;

 private:
  std::vector<Transition> buffer_;
  std::size_t head_ = 0;  // next write slot
  std::size_t size_ = 0;
};

struct TransitionBatch {
  Eigen::MatrixXd states;
  Eigen::MatrixXd next_states;
  Eigen::VectorXi actions;
  Eigen::VectorXd rewards;
  Eigen::VectorXd done;  // 1.0 / 0.0
};

TransitionBatch materialize(std::span<const Transition* const> batch, Eigen::Index state_dim);

}  // namespace delaymatch
