#include "delaymatch/rewards.hpp"

#include <cmath>
#include <ostream>
#include <stdexcept>

namespace delaymatch {

void RewardConfig::validate() const {
  if (!(match_benefit_V > 0.0)) throw std::invalid_argument("reward: V must be positive");
  if (!(rho >= 0.0 && rho <= 1.0)) throw std::invalid_argument("reward: rho must lie in [0, 1]");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("reward: gamma must lie in (0, 1]");
  if (!(expiry_penalty >= 0.0)) throw std::invalid_argument("reward: expiry_penalty must be >= 0");
}

double individual_reward(const AgentRecord& agent, int t, const RewardConfig& cfg) {
  if (t > agent.terminal_interval)
    throw std::out_of_range("individual_reward: interval after the agent terminated");
  if (t < agent.terminal_interval) return 0.0;
  if (agent.cause == TerminationCause::matched) return cfg.match_benefit_V - agent.pickup_time_s;
  return -cfg.expiry_penalty;
}

double blended_reward(double individual, double global, double rho) {
  if (!(rho >= 0.0 && rho <= 1.0)) throw std::invalid_argument("blended_reward: rho must lie in [0, 1]");
  // Endpoints return the pure schemes exactly.
  if (rho == 1.0) return individual;
  if (rho == 0.0) return global;
  return rho * individual + (1.0 - rho) * global;
}

double discounted_return(std::span<const double> rewards, double gamma) {
  double total = 0.0;
  double factor = 1.0;
  for (double r : rewards) {
    total += factor * r;
    factor *= gamma;
  }
  return total;
}

void EpisodeRewardLedger::record(const AgentRecord& agent) {
  if (closed_) throw std::logic_error("ledger: record after close");
  LedgerEntry e;
  e.agent = agent;
  e.individual = individual_reward(agent, agent.terminal_interval, cfg_);
  entries_.push_back(e);
}

void EpisodeRewardLedger::close() {
  double sum = 0.0;
  for (const auto& e : entries_) sum += e.individual;
  global_average_ = entries_.empty() ? 0.0 : sum / static_cast<double>(entries_.size());
  for (auto& e : entries_) {
    e.global = global_average_;
    e.blended = blended_reward(e.individual, e.global, cfg_.rho);
  }
  closed_ = true;
}

double EpisodeRewardLedger::global_average() const {
  if (!closed_) throw std::logic_error("ledger: global average requested before the epoch ended");
  return global_average_;
}

const std::vector<LedgerEntry>& EpisodeRewardLedger::entries() const { return entries_; }

EpisodeRewardLedger make_ledger(const std::vector<AgentRecord>& agents, const RewardConfig& cfg) {
  EpisodeRewardLedger ledger(cfg);
  for (const auto& a : agents) ledger.record(a);
  ledger.close();
  return ledger;
}

std::vector<RewardSeries> backfill_global_rewards(const EpisodeRewardLedger& ledger) {
  if (!ledger.closed()) throw std::logic_error("backfill_global_rewards: epoch not finished");
  std::vector<RewardSeries> out;
  out.reserve(ledger.agent_count());
  for (const auto& e : ledger.entries()) {
    RewardSeries s;
    s.agent_id = e.agent.id;
    s.first_interval = e.agent.created_interval;
    s.rewards.assign(e.agent.terminal_interval - e.agent.created_interval + 1, 0.0);
    s.rewards.back() = e.global;
    out.push_back(std::move(s));
  }
  return out;
}

void write_ledger_csv(std::ostream& out, const EpisodeRewardLedger& ledger) {
  const auto old_precision = out.precision(17);
  out << "agent_id,terminal_interval,cause,individual,global,blended\n";
  for (const auto& e : ledger.entries()) {
    out << e.agent.id << ',' << e.agent.terminal_interval << ','
        << (e.agent.cause == TerminationCause::matched ? "matched" : "expired") << ','
        << e.individual << ',' << e.global << ',' << e.blended << '\n';
  }
  out.precision(old_precision);
}

double EpisodeMetrics::answer_rate() const {
  return agents == 0 ? 0.0 : static_cast<double>(matched) / static_cast<double>(agents);
}

double EpisodeMetrics::mean_pickup_time_s() const {
  return matched == 0 ? 0.0 : pickup_sum_s / static_cast<double>(matched);
}

double EpisodeMetrics::mean_agent_reward_s() const {
  return agents == 0 ? 0.0 : reward_sum_s / static_cast<double>(agents);
}

void EpisodeMetrics::add(const EpisodeMetrics& other) {
  agents += other.agents;
  matched += other.matched;
  expired += other.expired;
  pickup_sum_s += other.pickup_sum_s;
  reward_sum_s += other.reward_sum_s;
}

EpisodeMetrics summarize_episode(const EpisodeResult& episode, const EpisodeRewardLedger& ledger) {
  EpisodeMetrics m;
  m.agents = static_cast<std::int64_t>(episode.agents.size());
  for (const auto& a : episode.agents) {
    if (a.cause == TerminationCause::matched) {
      ++m.matched;
      m.pickup_sum_s += a.pickup_time_s;
    } else {
      ++m.expired;
    }
  }
  for (const auto& e : ledger.entries()) m.reward_sum_s += e.blended;
  return m;
}

EpisodeMetrics summarize_episode(const EpisodeResult& episode, const RewardConfig& cfg) {
  return summarize_episode(episode, make_ledger(episode.agents, cfg));
}

}  // namespace delaymatch
