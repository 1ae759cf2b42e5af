#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "delaymatch/calibrated.hpp"
#include "delaymatch/geometry.hpp"
#include "delaymatch/matcher.hpp"

namespace delaymatch {

enum class EnvironmentKind { custom, calibrated };

/// Everything needed to reset a world; shared by all episodes of a run.
struct EnvironmentConfig {
  EnvironmentKind kind = EnvironmentKind::custom;
  AreaConfig area;
  int horizon = 30;

  // custom environment
  GaussianArrivalSpec passengers{{1.2, 1.2}, 0.8, 0.8, 1.0};
  GaussianArrivalSpec drivers{{2.8, 2.8}, 0.8, 0.8, 1.0};
  ArrivalMode arrival_mode = ArrivalMode::poisson;

  // calibrated environment
  std::shared_ptr<const ArrivalSchedule> schedule;
  int start_interval = 0;
  /// Requests expire once they have waited this many intervals (calibrated only).
  std::optional<int> patience;

  void validate() const;
};

enum class RequestStatus { waiting, matched, expired };

struct Request {
  std::int64_t id = 0;
  Location origin;
  Location destination;
  double trip_duration_s = 0.0;
  int created_interval = 0;
  int waited_intervals = 0;
  RequestStatus status = RequestStatus::waiting;
  std::optional<double> matched_cost;
};

enum class DriverStatus { idle, occupied, offline };

struct Driver {
  std::int64_t id = 0;
  Location location;
  DriverStatus status = DriverStatus::idle;
  std::optional<int> busy_until;
  std::optional<int> online_at;
  std::optional<int> offline_at;
  Location drop_off;
  bool offline_after_trip = false;
};

enum class TerminationCause { matched, expired };

/// One terminated agent; `terminal_interval` is the interval of its last decision.
struct AgentRecord {
  std::int64_t id = 0;
  int created_interval = 0;
  int terminal_interval = 0;
  TerminationCause cause = TerminationCause::expired;
  double pickup_time_s = 0.0;
  int zone = 0;
};

enum class EventType { match, arrival, expire, online, offline };

struct LogEvent {
  int t = 0;
  EventType type = EventType::arrival;
  std::int64_t request_id = -1;
  std::int64_t driver_id = -1;
  double value = 0.0;
};

struct MatchedPair {
  std::int64_t request_id = 0;
  std::int64_t driver_id = 0;
  double pickup_time_s = 0.0;
};

struct StepOutcome {
  std::vector<MatchedPair> matched;
  std::vector<Request> new_requests;
  std::vector<std::pair<std::int64_t, TerminationCause>> terminated;
};

/// Mutable state of one episode of the matching system.
class WorldState {
 public:
  WorldState(EnvironmentConfig env, std::uint64_t seed);

  int t() const { return t_; }
  int horizon() const { return env_.horizon; }
  bool at_horizon() const { return t_ >= env_.horizon; }
  const EnvironmentConfig& env() const { return env_; }
  const AreaConfig& area() const { return env_.area; }

  const std::vector<Request>& waiting() const { return waiting_; }
  const std::vector<Driver>& drivers() const { return drivers_; }
  std::vector<const Driver*> idle_drivers() const;

  /// Applies one interval: match the pool, update drivers, inject arrivals.
  /// `actions` holds one 0/1 entry per waiting request in `waiting()` order.
  StepOutcome step(std::span<const int> actions);

  /// Expires every request still waiting; only valid at the horizon.
  std::vector<std::int64_t> expire_remaining();

  const std::vector<LogEvent>& log() const { return log_; }
  const std::vector<AgentRecord>& finished() const { return finished_; }
  std::int64_t created_count() const { return created_; }

  /// Ground-truth expected arrivals per interval and zone for interval `t`.
  std::vector<double> expected_passenger_rate() const;
  std::vector<double> expected_driver_rate() const;

 private:
  void generate_requests(int interval);
  void update_shifts(int interval);
  void complete_trips();
  void terminate(std::size_t waiting_index, TerminationCause cause, double cost);

  EnvironmentConfig env_;
  Rng rng_;
  int t_ = 0;
  std::vector<Request> waiting_;
  std::vector<Driver> drivers_;
  std::vector<LogEvent> log_;
  std::vector<AgentRecord> finished_;
  std::vector<Request> fresh_;
  std::int64_t next_request_id_ = 0;
  std::int64_t next_driver_id_ = 0;
  std::int64_t created_ = 0;
  std::size_t next_shift_ = 0;
  std::vector<double> custom_passenger_rate_;
  std::vector<double> custom_driver_rate_;
};

/// Decides for every waiting request whether it enters this interval's pool.
class JointPolicy {
 public:
  virtual ~JointPolicy() = default;
  virtual std::vector<int> act(const WorldState& world) = 0;
};

struct IntervalDecisions {
  int t = 0;
  std::vector<std::int64_t> request_ids;
  std::vector<int> actions;
};

struct EpisodeResult {
  std::vector<IntervalDecisions> intervals;
  std::vector<AgentRecord> agents;  // in termination order
  std::vector<LogEvent> log;
  std::int64_t created = 0;
  std::int64_t matched = 0;
  std::int64_t expired = 0;
};

EpisodeResult run_episode(WorldState& world, JointPolicy& policy);

const char* to_string(EventType e);
void write_episode_log(std::ostream& out, const std::vector<LogEvent>& log);

}  // namespace delaymatch
