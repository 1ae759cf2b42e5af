#include "delaymatch/replay.hpp"

#include <stdexcept>
#include <unordered_set>

namespace delaymatch {

ReplayMemory::ReplayMemory(std::size_t capacity) : buffer_(capacity) {
  if (capacity == 0) throw std::invalid_argument("ReplayMemory: capacity must be positive");
}

void ReplayMemory::push(Transition t) {
  buffer_[head_] = std::move(t);
  head_ = (head_ + 1) % buffer_.size();
  if (size_ < buffer_.size()) ++size_;
}

const Transition& ReplayMemory::at(std::size_t k) const {
  if (k >= size_) throw std::out_of_range("ReplayMemory::at");
  const std::size_t oldest = size_ < buffer_.size() ? 0 : head_;
  return buffer_[(oldest + k) % buffer_.size()];
}

std::vector<const Transition*> ReplayMemory::sample(std::size_t n, Rng& rng) const {
  if (n > size_) throw std::invalid_argument("ReplayMemory::sample: batch larger than memory");
  // Floyd's algorithm: n distinct indices in O(n).
  std::vector<std::size_t> picked;
  picked.reserve(n);
  std::unordered_set<std::size_t> seen;
  for (std::size_t j = size_ - n; j < size_; ++j) {
    std::uniform_int_distribution<std::size_t> pick(0, j);
    const std::size_t k = pick(rng);
    if (seen.insert(k).second) {
      picked.push_back(k);
    } else {
      seen.insert(j);
      picked.push_back(j);
    }
  }
  std::vector<const Transition*> out;
  out.reserve(n);
  for (auto k : picked) out.push_back(&at(k));
  return out;
}

TransitionBatch materialize(std::span<const Transition* const> batch, Eigen::Index state_dim) {
  const auto n = static_cast<Eigen::Index>(batch.size());
  TransitionBatch b;
  b.states.resize(n, state_dim);
  b.next_states = Eigen::MatrixXd::Zero(n, state_dim);
  b.actions.resize(n);
  b.rewards.resize(n);
  b.done.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Transition& t = *batch[static_cast<std::size_t>(i)];
    if (t.s.size() != state_dim)
      throw std::invalid_argument("materialize: state width " + std::to_string(t.s.size()) +
                                  " != " + std::to_string(state_dim));
    auto row = b.states.row(i);
    t.s.write(row);
    if (!t.done && t.s_next.size() == state_dim) {
      auto next = b.next_states.row(i);
      t.s_next.write(next);
    }
    b.actions(i) = t.a;
    b.rewards(i) = t.r;
    b.done(i) = t.done ? 1.0 : 0.0;
  }
  return b;
}

}  // namespace delaymatch
