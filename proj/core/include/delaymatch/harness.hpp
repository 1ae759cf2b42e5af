#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "delaymatch/config.hpp"
#include "delaymatch/learners.hpp"
#include "delaymatch/tabular.hpp"

namespace delaymatch {

struct MetricsRow {
  std::string model;
  double rho = 1.0;
  double q_d = 0.0;  // NaN for the calibrated environment
  double q_s = 0.0;
  int replication = 0;
  int epoch = 0;     // training epochs completed before evaluation
  int episodes = 0;  // evaluation episodes pooled into `metrics`
  EpisodeMetrics metrics;
};

struct CurveRow {
  std::string model;
  double rho = 1.0;
  double q_d = 0.0;
  double q_s = 0.0;
  int replication = 0;
  EpochReport report;
};

/// One evaluation world per seed; custom worlds take `arrival_rate` as both
/// the passenger and the driver rate when given.
EnvironmentConfig environment_for(const ExperimentConfig& cfg, std::optional<double> arrival_rate);
WorldFactory make_world_factory(const ExperimentConfig& cfg, std::optional<double> arrival_rate);

/// Runs `episodes` worlds with seeds first_seed, first_seed+1, ... and pools
/// their metrics. The policy must already be in its frozen mode.
EpisodeMetrics evaluate_policy(JointPolicy& policy, const WorldFactory& make_world, int episodes,
                               std::uint64_t first_seed, const RewardConfig& reward,
                               const std::function<void(int, const EpisodeResult&)>& on_episode = {});

/// A trained (or trivially constructed) policy and its learning curve.
struct TrainedModel {
  std::string model;
  std::unique_ptr<JointPolicy> policy;
  std::vector<EpochReport> curve;

  /// Switches learners to greedy/argmax action selection.
  void freeze();
  /// Writes a DMNN checkpoint (neural), a Q-table CSV (tabq) or nothing (pure).
  std::optional<std::filesystem::path> save(const std::filesystem::path& stem) const;
};

TrainedModel train_model(const std::string& model, const TrainingConfig& training, const EnvironmentConfig& env,
                         const WorldFactory& make_world,
                         const std::function<void(const EpochReport&)>& on_epoch = {});

/// Loads a frozen policy: "pure" ignores the path, "tabq" reads a Q-table CSV,
/// "dqn"/"a2c" read a checkpoint whose input width must equal 5M+2.
std::unique_ptr<JointPolicy> load_policy(const std::string& model, const std::filesystem::path& path,
                                         const TrainingConfig& training, const EnvironmentConfig& env);

MetricsRow evaluate_checkpoint(const ExperimentConfig& cfg, const std::string& model,
                               const std::filesystem::path& path, int episodes, std::uint64_t seed);

/// Seeds derived from the experiment seed; evaluation seeds are shared by all
/// models of one (setting, replication) so that comparisons are paired.
std::uint64_t training_seed(std::uint64_t base, std::size_t setting, int replication);
std::uint64_t evaluation_seed(std::uint64_t base, std::size_t setting, int replication);

struct ExperimentResult {
  std::vector<MetricsRow> metrics;
  std::vector<CurveRow> curves;
};

/// Trains and evaluates every configured model on every arrival setting
/// (or on the calibrated tables) and writes metrics.csv, summary.csv,
/// curves.csv, episodes/ and checkpoints/ under cfg.output_dir.
ExperimentResult run_experiment(const ExperimentConfig& cfg, std::ostream* progress = nullptr);

/// A2C at each configured ρ plus the pure-optimization reference on the first
/// arrival setting. Writes rho_sweep.csv (one row per model) and
/// rho_sweep_replications.csv alongside the usual outputs.
ExperimentResult sweep_rho(const ExperimentConfig& cfg, std::ostream* progress = nullptr);

/// Baseline-only episodes with the pure-optimization policy.
ExperimentResult simulate_baseline(const ExperimentConfig& cfg, std::ostream* progress = nullptr);

void write_metrics_csv(std::ostream& out, const std::vector<MetricsRow>& rows);
void write_summary_csv(std::ostream& out, const std::vector<MetricsRow>& rows);
void write_curves_csv(std::ostream& out, const std::vector<CurveRow>& rows);

/// Runs job(0..count-1) on up to `workers` threads; the first exception is rethrown.
void parallel_jobs(std::size_t count, int workers, const std::function<void(std::size_t)>& job);

}  // namespace delaymatch
