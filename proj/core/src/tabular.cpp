#include "delaymatch/tabular.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>

namespace delaymatch {

TabularQ::TabularQ(int horizon, int zones)
    : horizon_(horizon), zones_(zones),
      values_(static_cast<std::size_t>(std::max(horizon, 0)) * std::max(zones, 0) * 2, 0.0) {
  if (horizon < 1 || zones < 1) throw std::invalid_argument("TabularQ: horizon and zones must be >= 1");
}

std::size_t TabularQ::index(int t, int zone, int action) const {
  if (t < 0 || t >= horizon_ || zone < 0 || zone >= zones_ || action < 0 || action > 1)
    throw std::out_of_range("TabularQ: index (" + std::to_string(t) + "," + std::to_string(zone) +
                            "," + std::to_string(action) + ") out of range");
  return (static_cast<std::size_t>(t) * zones_ + zone) * 2 + action;
}

void TabularQ::write_csv(std::ostream& out) const {
  const auto old_precision = out.precision(17);
  out << "t,zone,Q0,Q1\n";
  for (int t = 0; t < horizon_; ++t)
    for (int z = 0; z < zones_; ++z) out << t << ',' << z << ',' << (*this)(t, z, 0) << ',' << (*this)(t, z, 1) << '\n';
  out.precision(old_precision);
}

TabularQ TabularQ::read_csv(std::istream& in, int horizon, int zones) {
  TabularQ q(horizon, zones);
  std::string line;
  if (!std::getline(in, line) || line.rfind("t,zone,Q0,Q1", 0) != 0)
    throw std::runtime_error("tabular Q csv: missing header");
  int rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    int t = 0, z = 0;
    double q0 = 0, q1 = 0;
    char c1 = 0, c2 = 0, c3 = 0;
    if (!(ss >> t >> c1 >> z >> c2 >> q0 >> c3 >> q1) || c1 != ',' || c2 != ',' || c3 != ',')
      throw std::runtime_error("tabular Q csv: malformed row " + std::to_string(rows + 2));
    q(t, z, 0) = q0;
    q(t, z, 1) = q1;
    ++rows;
  }
  if (rows != horizon * zones) throw std::runtime_error("tabular Q csv: expected T×M rows");
  return q;
}

int tabular_q_act(const TabularQ& q, int t, int zone, double epsilon, Rng& rng) {
  const double q0 = q(t, zone, 0);
  const double q1 = q(t, zone, 1);
  if (epsilon > 0.0) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    if (unit(rng) < epsilon) return std::bernoulli_distribution(0.5)(rng) ? 1 : 0;
  }
  return q1 >= q0 ? 1 : 0;
}

void tabular_q_update(TabularQ& q, const TabularTransition& tr, double alpha, double gamma) {
  double y = tr.r;
  if (!tr.done) y += gamma * std::max(q(tr.t_next, tr.zone_next, 0), q(tr.t_next, tr.zone_next, 1));
  double& cell = q(tr.t, tr.zone, tr.a);
  cell += alpha * (y - cell);
}

TabularQLearner::TabularQLearner(const TrainingConfig& cfg, int horizon, int zones)
    : cfg_(cfg), table_(horizon, zones), rng_(cfg.seed) {
  cfg_.validate();
}

std::vector<int> TabularQLearner::act(const WorldState& world) {
  const double eps = mode_ == PolicyMode::explore ? epsilon_ : 0.0;
  const int t = std::min(world.t(), table_.horizon() - 1);
  Recorded rec{world.t(), {}, {}, {}};
  std::vector<int> actions;
  for (const auto& r : world.waiting()) {
    const int zone = zone_of(r.origin, world.area());
    actions.push_back(tabular_q_act(table_, t, zone, eps, rng_));
    if (recording_) {
      rec.ids.push_back(r.id);
      rec.zones.push_back(zone);
    }
  }
  if (recording_) {
    rec.actions = actions;
    recorded_.push_back(std::move(rec));
  }
  return actions;
}

EpochReport TabularQLearner::train_epoch(const WorldFactory& make_world, int epoch) {
  EpochReport rep;
  rep.epoch = epoch;
  epsilon_ = cfg_.epsilon.value(epoch);
  rep.epsilon = epsilon_;
  const PolicyMode saved = mode_;
  mode_ = PolicyMode::explore;
  recorded_.clear();
  recording_ = true;
  WorldState world = make_world(rng_());
  const EpisodeResult episode = run_episode(world, *this);
  recording_ = false;
  mode_ = saved;

  const EpisodeRewardLedger ledger = make_ledger(episode.agents, cfg_.reward);
  std::unordered_map<std::int64_t, std::pair<int, double>> terminal;
  for (const auto& e : ledger.entries()) terminal[e.agent.id] = {e.agent.terminal_interval, e.blended};

  std::vector<TabularTransition> transitions;
  for (const auto& rec : recorded_) {
    for (std::size_t j = 0; j < rec.ids.size(); ++j) {
      const auto [ti, reward] = terminal.at(rec.ids[j]);
      TabularTransition tr;
      tr.t = std::min(rec.t, table_.horizon() - 1);
      tr.zone = rec.zones[j];
      tr.a = rec.actions[j];
      tr.done = rec.t == ti || rec.t + 1 >= table_.horizon();
      tr.r = rec.t == ti ? reward : 0.0;
      tr.t_next = tr.done ? tr.t : rec.t + 1;
      tr.zone_next = tr.zone;
      transitions.push_back(tr);
    }
  }
  recorded_.clear();
  std::shuffle(transitions.begin(), transitions.end(), rng_);
  for (const auto& tr : transitions) tabular_q_update(table_, tr, cfg_.tabular_alpha, cfg_.reward.gamma);

  rep.metrics = summarize_episode(episode, ledger);
  rep.updates = static_cast<int>(transitions.size());
  return rep;
}

}  // namespace delaymatch
