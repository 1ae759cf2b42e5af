#include "delaymatch/featurizer.hpp"

#include <algorithm>
#include <ostream>
#include <stdexcept>

namespace delaymatch {

Eigen::VectorXd GlobalState::normalized(const FeatureConfig& cfg) const {
  const int m = zones();
  Eigen::VectorXd g(4 * m);
  for (int z = 0; z < m; ++z) {
    g(z) = std::min(1.0, leftover_waiting_count[z] / cfg.count_scale);
    g(m + z) = std::min(1.0, leftover_idle_count[z] / cfg.count_scale);
    g(2 * m + z) = std::clamp(expected_new_passenger_rate[z], 0.0, 1.0);
    g(3 * m + z) = std::clamp(expected_new_driver_rate[z], 0.0, 1.0);
  }
  return g;
}

std::vector<double> LocalState::zone_one_hot() const {
  std::vector<double> v(zone_count, 0.0);
  v[zone] = 1.0;
  return v;
}

AgentStateVector::AgentStateVector(std::shared_ptr<const Eigen::VectorXd> global, LocalState local)
    : global_(std::move(global)), local_(local) {
  if (!global_ || global_->size() != 4 * static_cast<Eigen::Index>(local_.zone_count))
    throw std::invalid_argument("AgentStateVector: global block must have 4M entries");
}

Eigen::Index AgentStateVector::size() const {
  return global_ ? global_->size() + local_.zone_count + 2 : 0;
}

Eigen::VectorXd AgentStateVector::dense() const {
  Eigen::VectorXd v(size());
  write(v);
  return v;
}

GlobalState build_global_state(const WorldState& world) {
  const int m = world.area().zone_count();
  GlobalState g;
  g.leftover_waiting_count.assign(m, 0.0);
  g.leftover_idle_count.assign(m, 0.0);
  for (const auto& r : world.waiting()) g.leftover_waiting_count[zone_of(r.origin, world.area())] += 1.0;
  for (const auto* d : world.idle_drivers()) g.leftover_idle_count[zone_of(d->location, world.area())] += 1.0;
  g.expected_new_passenger_rate = world.expected_passenger_rate();
  g.expected_new_driver_rate = world.expected_driver_rate();
  return g;
}

MatchPlan virtual_match(const WorldState& world) {
  const auto& waiting = world.waiting();
  const auto idle = world.idle_drivers();
  CostMatrix costs(waiting.size(), idle.size());
  for (std::size_t i = 0; i < waiting.size(); ++i)
    for (std::size_t j = 0; j < idle.size(); ++j)
      costs(i, j) = pickup_time(waiting[i].origin, idle[j]->location, world.area());
  return solve_assignment(costs);
}

LocalState build_local_state(std::size_t index, const MatchPlan& virtual_plan,
                             const WorldState& world) {
  const auto& waiting = world.waiting();
  if (index >= waiting.size()) throw std::out_of_range("build_local_state: agent is not waiting");
  const auto& area = world.area();
  const Request& r = waiting[index];
  const double c_max = max_pickup_time(area);

  double pickup = c_max;
  const auto it = std::lower_bound(
      virtual_plan.pairs.begin(), virtual_plan.pairs.end(), index,
      [](const auto& p, std::size_t i) { return p.first < i; });
  if (it != virtual_plan.pairs.end() && it->first == index) {
    const auto idle = world.idle_drivers();
    pickup = pickup_time(r.origin, idle.at(it->second)->location, area);
  }

  LocalState s;
  s.zone_count = area.zone_count();
  s.zone = zone_of(r.origin, area);
  const double waited_s = r.waited_intervals * area.interval_seconds;
  s.cumulative_wait = std::min(1.0, waited_s / (world.horizon() * area.interval_seconds));
  s.expected_pickup = pickup / c_max;
  return s;
}

Eigen::MatrixXd JointState::matrix() const {
  if (agents.empty()) return {};
  Eigen::MatrixXd out(static_cast<Eigen::Index>(agents.size()), agents.front().size());
  for (std::size_t k = 0; k < agents.size(); ++k) {
    auto row = out.row(static_cast<Eigen::Index>(k));
    agents[k].write(row);
  }
  return out;
}

JointState assemble_joint_state(const WorldState& world, const FeatureConfig& cfg) {
  JointState joint;
  joint.t = world.t();
  joint.global = std::make_shared<const Eigen::VectorXd>(build_global_state(world).normalized(cfg));
  if (world.waiting().empty()) return joint;
  const MatchPlan plan = virtual_match(world);
  joint.agents.reserve(world.waiting().size());
  for (std::size_t k = 0; k < world.waiting().size(); ++k)
    joint.agents.emplace_back(joint.global, build_local_state(k, plan, world));
  return joint;
}

void write_feature_header(std::ostream& out, int zones) {
  out << "t,request_id";
  for (const char* block : {"waiting", "idle", "passenger_rate", "driver_rate", "zone"})
    for (int z = 0; z < zones; ++z) out << ',' << block << '_' << z;
  out << ",cumulative_wait,expected_pickup\n";
}

void write_feature_rows(std::ostream& out, const JointState& joint,
                        std::span<const std::int64_t> request_ids) {
  const auto old_precision = out.precision(17);
  for (std::size_t k = 0; k < joint.agents.size(); ++k) {
    out << joint.t << ',' << (k < request_ids.size() ? request_ids[k] : -1);
    const Eigen::VectorXd v = joint.agents[k].dense();
    for (Eigen::Index i = 0; i < v.size(); ++i) out << ',' << v(i);
    out << '\n';
  }
  out.precision(old_precision);
}

}  // namespace delaymatch
