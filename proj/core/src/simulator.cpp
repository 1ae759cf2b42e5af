#include "delaymatch/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>
#include <string>

namespace delaymatch {

void EnvironmentConfig::validate() const {
  area.validate();
  if (horizon < 1) throw std::invalid_argument("environment: horizon must be >= 1");
  if (kind == EnvironmentKind::custom) {
    passengers.validate();
    drivers.validate();
  } else {
    if (!schedule) throw std::invalid_argument("environment: calibrated kind needs a schedule");
    if (schedule->area.zone_count() != area.zone_count())
      throw std::invalid_argument("environment: schedule grid differs from area grid");
    if (start_interval < 0) throw std::invalid_argument("environment: start_interval < 0");
  }
  if (patience && *patience < 1) throw std::invalid_argument("environment: patience must be >= 1");
}

WorldState::WorldState(EnvironmentConfig env, std::uint64_t seed) : env_(std::move(env)), rng_(seed) {
  env_.validate();
  if (env_.kind == EnvironmentKind::custom) {
    custom_passenger_rate_ = zone_arrival_rates(env_.passengers, env_.area);
    custom_driver_rate_ = zone_arrival_rates(env_.drivers, env_.area);
  } else {
    // Drivers already on shift when the episode starts.
    const auto& shifts = env_.schedule->shifts;
    const int start = env_.start_interval;
    while (next_shift_ < shifts.size() && shifts[next_shift_].online_interval < start) {
      const auto& s = shifts[next_shift_++];
      if (s.offline_interval <= start) continue;
      Driver d;
      d.id = s.driver_id;
      d.location = s.location;
      d.online_at = s.online_interval - start;
      d.offline_at = s.offline_interval - start;
      drivers_.push_back(d);
      log_.push_back({0, EventType::online, -1, d.id, 0.0});
    }
  }
  generate_requests(0);
  update_shifts(0);
}

std::vector<const Driver*> WorldState::idle_drivers() const {
  std::vector<const Driver*> out;
  for (const auto& d : drivers_)
    if (d.status == DriverStatus::idle) out.push_back(&d);
  return out;
}

void WorldState::generate_requests(int interval) {
  auto add = [&](Location origin, Location destination, double trip) {
    Request r;
    r.id = next_request_id_++;
    r.origin = origin;
    r.destination = destination;
    r.trip_duration_s = trip;
    r.created_interval = interval;
    waiting_.push_back(r);
    ++created_;
    log_.push_back({interval, EventType::arrival, r.id, -1, 0.0});
  };
  if (env_.kind == EnvironmentKind::custom) {
    const int n = sample_arrival_count(env_.passengers.rate_per_interval, env_.arrival_mode, interval, rng_);
    for (int k = 0; k < n; ++k) {
      const Location o = sample_location(env_.passengers, env_.area, rng_);
      add(o, o, 0.0);
    }
    return;
  }
  const int abs = env_.start_interval + interval;
  if (abs >= env_.schedule->interval_count) return;
  for (const auto& sr : env_.schedule->requests[abs]) add(sr.origin, sr.destination, sr.trip_duration_s);
}

void WorldState::update_shifts(int interval) {
  if (env_.kind == EnvironmentKind::custom) {
    const int n = sample_arrival_count(env_.drivers.rate_per_interval, env_.arrival_mode, interval, rng_);
    for (int k = 0; k < n; ++k) {
      Driver d;
      d.id = next_driver_id_++;
      d.location = sample_location(env_.drivers, env_.area, rng_);
      d.online_at = interval;
      drivers_.push_back(d);
      log_.push_back({interval, EventType::online, -1, d.id, 0.0});
    }
    return;
  }
  for (auto& d : drivers_) {
    if (!d.offline_at || *d.offline_at > interval) continue;
    if (d.status == DriverStatus::idle) {
      d.status = DriverStatus::offline;
      log_.push_back({interval, EventType::offline, -1, d.id, 0.0});
    } else if (d.status == DriverStatus::occupied) {
      d.offline_after_trip = true;
    }
  }
  std::erase_if(drivers_, [](const Driver& d) { return d.status == DriverStatus::offline; });

  const auto& shifts = env_.schedule->shifts;
  const int abs = env_.start_interval + interval;
  while (next_shift_ < shifts.size() && shifts[next_shift_].online_interval <= abs) {
    const auto& s = shifts[next_shift_++];
    if (s.offline_interval <= abs) continue;
    Driver d;
    d.id = s.driver_id;
    d.location = s.location;
    d.online_at = s.online_interval - env_.start_interval;
    d.offline_at = s.offline_interval - env_.start_interval;
    drivers_.push_back(d);
    log_.push_back({interval, EventType::online, -1, d.id, 0.0});
  }
}

void WorldState::complete_trips() {
  for (auto& d : drivers_) {
    if (d.status != DriverStatus::occupied || *d.busy_until > t_) continue;
    d.busy_until.reset();
    d.location = d.drop_off;
    if (d.offline_after_trip) {
      d.status = DriverStatus::offline;
      log_.push_back({t_, EventType::offline, -1, d.id, 0.0});
    } else {
      d.status = DriverStatus::idle;
    }
  }
  std::erase_if(drivers_, [](const Driver& d) { return d.status == DriverStatus::offline; });
}

void WorldState::terminate(std::size_t idx, TerminationCause cause, double cost) {
  Request& r = waiting_[idx];
  AgentRecord rec;
  rec.id = r.id;
  rec.created_interval = r.created_interval;
  rec.terminal_interval = std::min(t_, env_.horizon - 1);
  rec.cause = cause;
  rec.pickup_time_s = cost;
  rec.zone = zone_of(r.origin, env_.area);
  finished_.push_back(rec);
  if (cause == TerminationCause::matched) {
    r.status = RequestStatus::matched;
    r.matched_cost = cost;
  } else {
    r.status = RequestStatus::expired;
  }
}

StepOutcome WorldState::step(std::span<const int> actions) {
  if (at_horizon()) throw std::logic_error("step: episode already reached its horizon");
  if (actions.size() != waiting_.size())
    throw std::invalid_argument("step: got " + std::to_string(actions.size()) +
                                " actions for " + std::to_string(waiting_.size()) +
                                " waiting requests");
  StepOutcome out;

  std::vector<std::size_t> pool;
  for (std::size_t k = 0; k < actions.size(); ++k) {
    if (actions[k] != 0 && actions[k] != 1) throw std::invalid_argument("step: actions must be 0 or 1");
    if (actions[k] == 1) pool.push_back(k);
  }
  std::vector<std::size_t> idle;
  for (std::size_t k = 0; k < drivers_.size(); ++k)
    if (drivers_[k].status == DriverStatus::idle) idle.push_back(k);

  if (!pool.empty() && !idle.empty()) {
    CostMatrix costs(pool.size(), idle.size());
    for (std::size_t i = 0; i < pool.size(); ++i)
      for (std::size_t j = 0; j < idle.size(); ++j)
        costs(i, j) = pickup_time(waiting_[pool[i]].origin, drivers_[idle[j]].location, env_.area);
    const MatchPlan plan = solve_assignment(costs);
    for (const auto& [i, j] : plan.pairs) {
      const std::size_t wi = pool[i];
      Driver& d = drivers_[idle[j]];
      const double cost = costs(i, j);
      terminate(wi, TerminationCause::matched, cost);
      out.matched.push_back({waiting_[wi].id, d.id, cost});
      out.terminated.emplace_back(waiting_[wi].id, TerminationCause::matched);
      log_.push_back({t_, EventType::match, waiting_[wi].id, d.id, cost});
      if (env_.kind == EnvironmentKind::custom) {
        d.status = DriverStatus::offline;  // leaves the episode
      } else {
        const double busy_s = cost + waiting_[wi].trip_duration_s;
        d.status = DriverStatus::occupied;
        d.busy_until = t_ + std::max(1, static_cast<int>(std::ceil(busy_s / env_.area.interval_seconds)));
        d.drop_off = waiting_[wi].destination;
      }
    }
    std::erase_if(waiting_, [](const Request& r) { return r.status != RequestStatus::waiting; });
    if (env_.kind == EnvironmentKind::custom)
      std::erase_if(drivers_, [](const Driver& d) { return d.status == DriverStatus::offline; });
  }

  complete_trips();

  for (auto& r : waiting_) ++r.waited_intervals;
  if (env_.patience) {
    for (std::size_t k = 0; k < waiting_.size(); ++k) {
      if (waiting_[k].waited_intervals >= *env_.patience) {
        terminate(k, TerminationCause::expired, 0.0);
        out.terminated.emplace_back(waiting_[k].id, TerminationCause::expired);
        log_.push_back({t_, EventType::expire, waiting_[k].id, -1, double(waiting_[k].waited_intervals)});
      }
    }
    std::erase_if(waiting_, [](const Request& r) { return r.status != RequestStatus::waiting; });
  }

  const std::size_t before = waiting_.size();
  if (t_ + 1 < env_.horizon) {
    generate_requests(t_ + 1);
    update_shifts(t_ + 1);
  }
  out.new_requests.assign(waiting_.begin() + static_cast<std::ptrdiff_t>(before), waiting_.end());
  ++t_;
  return out;
}

std::vector<std::int64_t> WorldState::expire_remaining() {
  if (!at_horizon()) throw std::logic_error("expire_remaining: episode has not reached its horizon");
  std::vector<std::int64_t> ids;
  for (std::size_t k = 0; k < waiting_.size(); ++k) {
    terminate(k, TerminationCause::expired, 0.0);
    ids.push_back(waiting_[k].id);
    log_.push_back({t_, EventType::expire, waiting_[k].id, -1, double(waiting_[k].waited_intervals)});
  }
  waiting_.clear();
  return ids;
}

std::vector<double> WorldState::expected_passenger_rate() const {
  if (env_.kind == EnvironmentKind::custom) return custom_passenger_rate_;
  const auto& s = *env_.schedule;
  if (s.passenger_rate.empty()) return std::vector<double>(env_.area.zone_count(), 0.0);
  return s.passenger_rate[s.period_of(env_.start_interval + t_)];
}

std::vector<double> WorldState::expected_driver_rate() const {
  if (env_.kind == EnvironmentKind::custom) return custom_driver_rate_;
  const auto& s = *env_.schedule;
  if (s.driver_rate.empty()) return std::vector<double>(env_.area.zone_count(), 0.0);
  return s.driver_rate[s.period_of(env_.start_interval + t_)];
}

EpisodeResult run_episode(WorldState& world, JointPolicy& policy) {
  EpisodeResult result;
  while (!world.at_horizon()) {
    IntervalDecisions d;
    d.t = world.t();
    for (const auto& r : world.waiting()) d.request_ids.push_back(r.id);
    d.actions = policy.act(world);
    world.step(d.actions);
    result.intervals.push_back(std::move(d));
  }
  world.expire_remaining();
  result.agents = world.finished();
  result.log = world.log();
  result.created = world.created_count();
  for (const auto& a : result.agents) {
    if (a.cause == TerminationCause::matched)
      ++result.matched;
    else
      ++result.expired;
  }
  return result;
}

const char* to_string(EventType e) {
  switch (e) {
    case EventType::match: return "match";
    case EventType::arrival: return "arrival";
    case EventType::expire: return "expire";
    case EventType::online: return "online";
    case EventType::offline: return "offline";
  }
  return "unknown";
}

void write_episode_log(std::ostream& out, const std::vector<LogEvent>& log) {
  const auto old_precision = out.precision(17);
  out << "t,event,request_id,driver_id,value\n";
  for (const auto& e : log)
    out << e.t << ',' << to_string(e.type) << ',' << e.request_id << ',' << e.driver_id << ','
        << e.value << '\n';
  out.precision(old_precision);
}

}  // namespace delaymatch
