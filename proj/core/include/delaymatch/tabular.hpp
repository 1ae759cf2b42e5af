#pragma once

#include <iosfwd>
#include <vector>

#include "delaymatch/learners.hpp"

namespace delaymatch {

/// Q-table indexed by (interval, zone, action); shape T × M × 2.
class TabularQ {
 public:
  TabularQ(int horizon, int zones);

  int horizon() const { return horizon_; }
  int zones() const { return zones_; }
  double operator()(int t, int zone, int action) const { return values_[index(t, zone, action)]; }
  double& operator()(int t, int zone, int action) { return values_[index(t, zone, action)]; }

  void write_csv(std::ostream& out) const;
  static TabularQ read_csv(std::istream& in, int horizon, int zones);

 private:
  std::size_t index(int t, int zone, int action) const;

  int horizon_;
  int zones_;
  std::vector<double> values_;
};

struct TabularTransition {
  int t = 0;
  int zone = 0;
  int a = 1;
  double r = 0.0;
  bool done = false;
  int t_next = 0;
  int zone_next = 0;
};

/// ε-greedy on the table row; ties choose action 1.
int tabular_q_act(const TabularQ& q, int t, int zone, double epsilon, Rng& rng);

/// Q ← Q + α(y − Q) with y = r (done) or r + γ·max_a' Q(t', z', a').
void tabular_q_update(TabularQ& q, const TabularTransition& tr, double alpha, double gamma);

/// Tabular baseline whose state is only (interval, zone of the request).
class TabularQLearner final : public JointPolicy {
 public:
  TabularQLearner(const TrainingConfig& cfg, int horizon, int zones);

  std::vector<int> act(const WorldState& world) override;
  EpochReport train_epoch(const WorldFactory& make_world, int epoch);

  void set_mode(PolicyMode mode) { mode_ = mode; }
  const TabularQ& table() const { return table_; }
  TabularQ& table() { return table_; }

 private:
  struct Recorded {
    int t;
    std::vector<std::int64_t> ids;
    std::vector<int> zones;
    std::vector<int> actions;
  };

  TrainingConfig cfg_;
  TabularQ table_;
  Rng rng_;
  PolicyMode mode_ = PolicyMode::explore;
  double epsilon_ = 1.0;
  bool recording_ = false;
  std::vector<Recorded> recorded_;
};

}  // namespace delaymatch
