#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "delaymatch/simulator.hpp"

namespace delaymatch {

struct RewardConfig {
  double match_benefit_V = 800.0;  // seconds
  double rho = 1.0;
  double gamma = 0.99;
  /// Terminal reward of an expired agent is −expiry_penalty.
  double expiry_penalty = 0.0;

  void validate() const;
};

/// Individual reward of an agent at interval `t`: zero before its terminal
/// interval, V − c at it when matched. Throws std::out_of_range if t > T_i.
double individual_reward(const AgentRecord& agent, int t, const RewardConfig& cfg);

double blended_reward(double individual, double global, double rho);

/// Σ γ^k r_k over the sequence, k counted from its first entry.
double discounted_return(std::span<const double> rewards, double gamma);

struct LedgerEntry {
  AgentRecord agent;
  double individual = 0.0;  // terminal individual reward
  double global = 0.0;      // epoch average credited at T_i
  double blended = 0.0;
};

/// Terminal rewards of every agent of one finished epoch.
class EpisodeRewardLedger {
 public:
  EpisodeRewardLedger() = default;
  explicit EpisodeRewardLedger(const RewardConfig& cfg) : cfg_(cfg) { cfg_.validate(); }

  void record(const AgentRecord& agent);
  /// Computes the global average over all N recorded agents and blends.
  void close();

  bool closed() const { return closed_; }
  std::size_t agent_count() const { return entries_.size(); }
  double global_average() const;
  const std::vector<LedgerEntry>& entries() const;
  const RewardConfig& config() const { return cfg_; }

 private:
  RewardConfig cfg_;
  std::vector<LedgerEntry> entries_;
  double global_average_ = 0.0;
  bool closed_ = false;
};

EpisodeRewardLedger make_ledger(const std::vector<AgentRecord>& agents, const RewardConfig& cfg);

/// Per-agent reward sequence from its creation interval to T_i.
struct RewardSeries {
  std::int64_t agent_id = 0;
  int first_interval = 0;
  std::vector<double> rewards;
};

/// Global rewards laid out per interval: the epoch average at T_i, 0 elsewhere.
/// Throws std::logic_error if the ledger is not closed.
std::vector<RewardSeries> backfill_global_rewards(const EpisodeRewardLedger& ledger);

void write_ledger_csv(std::ostream& out, const EpisodeRewardLedger& ledger);

/// Pooled episode statistics; add() accumulates further episodes.
struct EpisodeMetrics {
  std::int64_t agents = 0;
  std::int64_t matched = 0;
  std::int64_t expired = 0;
  double pickup_sum_s = 0.0;
  double reward_sum_s = 0.0;  // blended terminal rewards

  double answer_rate() const;
  double mean_pickup_time_s() const;  // over matched agents
  double mean_agent_reward_s() const;  // over all agents
  void add(const EpisodeMetrics& other);
};

EpisodeMetrics summarize_episode(const EpisodeResult& episode, const EpisodeRewardLedger& ledger);
EpisodeMetrics summarize_episode(const EpisodeResult& episode, const RewardConfig& cfg);

}  // namespace delaymatch
