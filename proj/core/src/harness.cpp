#include "delaymatch/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <ctime>
#include <exception>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "delaymatch/checkpoint.hpp"

namespace delaymatch {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t mix(std::uint64_t base, std::size_t setting, int replication, std::uint64_t salt) {
  std::uint64_t h = splitmix64(base ^ salt);
  h = splitmix64(h ^ static_cast<std::uint64_t>(setting));
  return splitmix64(h ^ static_cast<std::uint64_t>(replication));
}

std::string timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream ss;
  ss << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return ss.str();
}

std::ofstream open_output(const std::filesystem::path& path, bool header_comment) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  if (header_comment) out << "# delaymatch generated " << timestamp() << '\n';
  return out;
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  std::ostringstream ss;
  ss << std::setprecision(17) << v;
  return ss.str();
}

std::string setting_tag(const std::string& model, double rho, double q, int replication) {
  std::ostringstream ss;
  ss << model;
  if (!std::isnan(q)) ss << "_q" << q;
  ss << "_rho" << rho << "_rep" << replication;
  return ss.str();
}

struct Job {
  std::string model;
  double rho = 1.0;
  std::optional<double> arrival_rate;
  std::size_t setting = 0;
  int replication = 0;
};

double rate_or_nan(const std::optional<double>& q) {
  return q ? *q : std::numeric_limits<double>::quiet_NaN();
}

struct JobOutput {
  MetricsRow row;
  std::vector<CurveRow> curve;
};

JobOutput run_job(const ExperimentConfig& cfg, const Job& job, std::ostream* progress, std::mutex& progress_mu) {
  TrainingConfig training = cfg.training;
  training.reward.rho = job.rho;
  training.seed = training_seed(cfg.seed, job.setting, job.replication);
  const EnvironmentConfig env = environment_for(cfg, job.arrival_rate);
  const WorldFactory factory = make_world_factory(cfg, job.arrival_rate);
  const double q = rate_or_nan(job.arrival_rate);
  const std::string tag = setting_tag(job.model, job.rho, q, job.replication);

  JobOutput out;
  const auto on_epoch = [&](const EpochReport& rep) {
    if (!progress) return;
    const int every = std::max(1, training.epochs / 10);
    if ((rep.epoch + 1) % every != 0 && rep.epoch + 1 != training.epochs) return;
    std::lock_guard lock(progress_mu);
    *progress << tag << " epoch " << rep.epoch + 1 << '/' << training.epochs << " answer_rate "
              << rep.metrics.answer_rate() << " pickup " << rep.metrics.mean_pickup_time_s() << " reward "
              << rep.metrics.mean_agent_reward_s() << " loss " << rep.loss << std::endl;
  };
  TrainedModel trained = train_model(job.model, training, env, factory, on_epoch);
  for (const auto& rep : trained.curve)
    out.curve.push_back(CurveRow{job.model, job.rho, q, q, job.replication, rep});

  trained.freeze();
  const std::filesystem::path stem = cfg.output_dir / "checkpoints" / tag;
  std::filesystem::create_directories(stem.parent_path());
  trained.save(stem);

  const auto on_episode = [&](int k, const EpisodeResult& ep) {
    if (!cfg.write_episode_logs || k != 0) return;
    std::ofstream log = open_output(cfg.output_dir / "episodes" / (tag + ".csv"), false);
    write_episode_log(log, ep.log);
  };
  out.row.model = job.model;
  out.row.rho = job.rho;
  out.row.q_d = q;
  out.row.q_s = q;
  out.row.replication = job.replication;
  out.row.epoch = static_cast<int>(trained.curve.size());
  out.row.episodes = cfg.eval_episodes;
  out.row.metrics = evaluate_policy(*trained.policy, factory, cfg.eval_episodes,
                                    evaluation_seed(cfg.seed, job.setting, job.replication), training.reward,
                                    on_episode);
  if (progress) {
    std::lock_guard lock(progress_mu);
    *progress << tag << " eval answer_rate " << out.row.metrics.answer_rate() << " pickup "
              << out.row.metrics.mean_pickup_time_s() << " reward " << out.row.metrics.mean_agent_reward_s()
              << std::endl;
  }
  return out;
}

ExperimentResult run_jobs(const ExperimentConfig& cfg, const std::vector<Job>& jobs, std::ostream* progress) {
  std::vector<JobOutput> outputs(jobs.size());
  std::mutex progress_mu;
  parallel_jobs(jobs.size(), cfg.workers,
                [&](std::size_t k) { outputs[k] = run_job(cfg, jobs[k], progress, progress_mu); });
  ExperimentResult result;
  for (auto& o : outputs) {
    result.metrics.push_back(o.row);
    result.curves.insert(result.curves.end(), o.curve.begin(), o.curve.end());
  }

  std::ofstream metrics = open_output(cfg.output_dir / "metrics.csv", true);
  write_metrics_csv(metrics, result.metrics);
  std::ofstream summary = open_output(cfg.output_dir / "summary.csv", true);
  write_summary_csv(summary, result.metrics);
  std::ofstream curves = open_output(cfg.output_dir / "curves.csv", true);
  write_curves_csv(curves, result.curves);
  return result;
}

std::vector<std::optional<double>> settings_of(const ExperimentConfig& cfg) {
  std::vector<std::optional<double>> settings;
  if (cfg.environment.kind == EnvironmentKind::calibrated || cfg.arrival_rates.empty())
    settings.push_back(std::nullopt);
  else
    for (double q : cfg.arrival_rates) settings.push_back(q);
  return settings;
}

struct Stats {
  double mean = 0.0;
  double sd = 0.0;
};

Stats stats_of(const std::vector<double>& xs) {
  Stats s;
  if (xs.empty()) return s;
  for (double x : xs) s.mean += x;
  s.mean /= static_cast<double>(xs.size());
  if (xs.size() > 1) {
    for (double x : xs) s.sd += (x - s.mean) * (x - s.mean);
    s.sd = std::sqrt(s.sd / static_cast<double>(xs.size() - 1));
  }
  return s;
}

}  // namespace

EnvironmentConfig environment_for(const ExperimentConfig& cfg, std::optional<double> arrival_rate) {
  EnvironmentConfig env = cfg.environment;
  if (env.kind == EnvironmentKind::custom && arrival_rate) {
    env.passengers.rate_per_interval = *arrival_rate;
    env.drivers.rate_per_interval = *arrival_rate;
  }
  return env;
}

WorldFactory make_world_factory(const ExperimentConfig& cfg, std::optional<double> arrival_rate) {
  EnvironmentConfig env = environment_for(cfg, arrival_rate);
  if (env.kind == EnvironmentKind::custom) {
    env.validate();
    return [env](std::uint64_t seed) { return WorldState(env, seed); };
  }
  auto tables = std::make_shared<const CalibratedTables>(
      load_calibrated_tables(cfg.requests_csv, cfg.shifts_csv, cfg.calibrated));
  if (!tables->options.resample) {
    Rng rng(cfg.seed);
    env.schedule = std::make_shared<const ArrivalSchedule>(build_schedule(*tables, rng));
    env.validate();
    return [env](std::uint64_t seed) { return WorldState(env, seed); };
  }
  return [env, tables](std::uint64_t seed) {
    EnvironmentConfig e = env;
    Rng rng(splitmix64(seed));
    e.schedule = std::make_shared<const ArrivalSchedule>(build_schedule(*tables, rng));
    return WorldState(e, seed);
  };
}

EpisodeMetrics evaluate_policy(JointPolicy& policy, const WorldFactory& make_world, int episodes,
                               std::uint64_t first_seed, const RewardConfig& reward,
                               const std::function<void(int, const EpisodeResult&)>& on_episode) {
  if (episodes < 1) throw std::invalid_argument("evaluate_policy: episodes must be >= 1");
  EpisodeMetrics total;
  for (int k = 0; k < episodes; ++k) {
    WorldState world = make_world(first_seed + static_cast<std::uint64_t>(k));
    const EpisodeResult ep = run_episode(world, policy);
    total.add(summarize_episode(ep, reward));
    if (on_episode) on_episode(k, ep);
  }
  return total;
}

void TrainedModel::freeze() {
  if (auto* n = dynamic_cast<NeuralLearner*>(policy.get())) n->set_mode(PolicyMode::greedy);
  if (auto* t = dynamic_cast<TabularQLearner*>(policy.get())) t->set_mode(PolicyMode::greedy);
}

std::optional<std::filesystem::path> TrainedModel::save(const std::filesystem::path& stem) const {
  if (auto* n = dynamic_cast<const NeuralLearner*>(policy.get())) {
    std::filesystem::path path = stem;
    path += ".ckpt";
    save_checkpoint(path, n->checkpoint());
    return path;
  }
  if (auto* t = dynamic_cast<const TabularQLearner*>(policy.get())) {
    std::filesystem::path path = stem;
    path += ".qtable.csv";
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    t->table().write_csv(out);
    return path;
  }
  return std::nullopt;
}

TrainedModel train_model(const std::string& model, const TrainingConfig& training, const EnvironmentConfig& env,
                         const WorldFactory& make_world, const std::function<void(const EpochReport&)>& on_epoch) {
  training.validate();
  TrainedModel out;
  out.model = model;
  const int zones = env.area.zone_count();
  if (model == "pure") {
    out.policy = std::make_unique<PureOptimizationPolicy>();
    return out;
  }
  const auto loop = [&](auto& learner) {
    for (int e = 0; e < training.epochs; ++e) {
      out.curve.push_back(learner.train_epoch(make_world, e));
      if (on_epoch) on_epoch(out.curve.back());
    }
  };
  if (model == "tabq") {
    auto learner = std::make_unique<TabularQLearner>(training, env.horizon, zones);
    loop(*learner);
    out.policy = std::move(learner);
  } else if (model == "dqn") {
    auto learner = std::make_unique<DqnLearner>(training, zones);
    loop(*learner);
    out.policy = std::move(learner);
  } else if (model == "a2c") {
    auto learner = std::make_unique<A2cLearner>(training, zones);
    loop(*learner);
    out.policy = std::move(learner);
  } else {
    throw std::invalid_argument("unknown model '" + model + "'");
  }
  return out;
}

std::unique_ptr<JointPolicy> load_policy(const std::string& model, const std::filesystem::path& path,
                                         const TrainingConfig& training, const EnvironmentConfig& env) {
  const int zones = env.area.zone_count();
  if (model == "pure") return std::make_unique<PureOptimizationPolicy>();
  if (model == "tabq") {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    auto learner = std::make_unique<TabularQLearner>(training, env.horizon, zones);
    learner->table() = TabularQ::read_csv(in, env.horizon, zones);
    learner->set_mode(PolicyMode::greedy);
    return learner;
  }
  const Checkpoint ckpt = load_checkpoint(path, AgentStateVector::dimension(zones));
  if (ckpt.model != model)
    throw std::runtime_error("checkpoint " + path.string() + " holds model '" + ckpt.model + "', expected '" +
                             model + "'");
  std::unique_ptr<NeuralLearner> learner;
  if (model == "dqn")
    learner = std::make_unique<DqnLearner>(training, zones, ckpt);
  else if (model == "a2c")
    learner = std::make_unique<A2cLearner>(training, zones, ckpt);
  else
    throw std::invalid_argument("unknown model '" + model + "'");
  learner->set_mode(PolicyMode::greedy);
  return learner;
}

MetricsRow evaluate_checkpoint(const ExperimentConfig& cfg, const std::string& model,
                               const std::filesystem::path& path, int episodes, std::uint64_t seed) {
  const std::optional<double> q =
      cfg.environment.kind == EnvironmentKind::custom && !cfg.arrival_rates.empty()
          ? std::optional<double>(cfg.arrival_rates.front())
          : std::nullopt;
  const EnvironmentConfig env = environment_for(cfg, q);
  auto policy = load_policy(model, path, cfg.training, env);
  MetricsRow row;
  row.model = model;
  row.rho = cfg.training.reward.rho;
  row.q_d = row.q_s = rate_or_nan(q);
  row.episodes = episodes;
  row.metrics = evaluate_policy(*policy, make_world_factory(cfg, q), episodes, seed, cfg.training.reward);
  return row;
}

std::uint64_t training_seed(std::uint64_t base, std::size_t setting, int replication) {
  return mix(base, setting, replication, 0x7261696eULL);
}

std::uint64_t evaluation_seed(std::uint64_t base, std::size_t setting, int replication) {
  return mix(base, setting, replication, 0x6576616cULL);
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, std::ostream* progress) {
  cfg.validate();
  std::vector<Job> jobs;
  const auto settings = settings_of(cfg);
  for (std::size_t s = 0; s < settings.size(); ++s)
    for (int r = 0; r < cfg.replications; ++r)
      for (const auto& m : cfg.models) jobs.push_back(Job{m, cfg.training.reward.rho, settings[s], s, r});
  return run_jobs(cfg, jobs, progress);
}

ExperimentResult sweep_rho(const ExperimentConfig& cfg, std::ostream* progress) {
  cfg.validate();
  const std::optional<double> q = settings_of(cfg).front();
  std::vector<Job> jobs;
  for (int r = 0; r < cfg.replications; ++r) {
    jobs.push_back(Job{"pure", 1.0, q, 0, r});
    for (double rho : cfg.rho_values) jobs.push_back(Job{"a2c", rho, q, 0, r});
  }
  ExperimentResult result = run_jobs(cfg, jobs, progress);

  std::ofstream per_rep = open_output(cfg.output_dir / "rho_sweep_replications.csv", true);
  write_metrics_csv(per_rep, result.metrics);

  std::ofstream table = open_output(cfg.output_dir / "rho_sweep.csv", true);
  table << "model,rho,replications,answer_rate,mean_pickup_time_s,mean_agent_reward_s\n";
  const auto emit = [&](const std::string& model, double rho) {
    EpisodeMetrics pooled;
    int n = 0;
    for (const auto& row : result.metrics)
      if (row.model == model && (model == "pure" || row.rho == rho)) {
        pooled.add(row.metrics);
        ++n;
      }
    table << model << ',' << (model == "pure" ? std::string("") : format_number(rho)) << ',' << n << ','
          << format_number(pooled.answer_rate()) << ',' << format_number(pooled.mean_pickup_time_s()) << ','
          << format_number(pooled.mean_agent_reward_s()) << '\n';
  };
  emit("pure", 1.0);
  for (double rho : cfg.rho_values) emit("a2c", rho);
  return result;
}

ExperimentResult simulate_baseline(const ExperimentConfig& cfg, std::ostream* progress) {
  cfg.validate();
  std::vector<Job> jobs;
  const auto settings = settings_of(cfg);
  for (std::size_t s = 0; s < settings.size(); ++s)
    for (int r = 0; r < cfg.replications; ++r) jobs.push_back(Job{"pure", 1.0, settings[s], s, r});
  return run_jobs(cfg, jobs, progress);
}

void write_metrics_csv(std::ostream& out, const std::vector<MetricsRow>& rows) {
  out << "model,rho,q_d,q_s,replication,epoch,episodes,agents,matched,expired,answer_rate,"
         "mean_pickup_time_s,mean_agent_reward_s\n";
  for (const auto& r : rows) {
    out << r.model << ',' << format_number(r.rho) << ',' << format_number(r.q_d) << ',' << format_number(r.q_s)
        << ',' << r.replication << ',' << r.epoch << ',' << r.episodes << ',' << r.metrics.agents << ','
        << r.metrics.matched << ',' << r.metrics.expired << ',' << format_number(r.metrics.answer_rate()) << ','
        << format_number(r.metrics.mean_pickup_time_s()) << ',' << format_number(r.metrics.mean_agent_reward_s())
        << '\n';
  }
}

void write_summary_csv(std::ostream& out, const std::vector<MetricsRow>& rows) {
  out << "model,rho,q_d,q_s,replications,answer_rate_mean,answer_rate_sd,mean_pickup_time_s_mean,"
         "mean_pickup_time_s_sd,mean_agent_reward_s_mean,mean_agent_reward_s_sd\n";
  std::vector<std::tuple<std::string, double, double>> keys;
  for (const auto& r : rows) {
    const auto key = std::make_tuple(r.model, r.rho, r.q_d);
    const bool seen = std::any_of(keys.begin(), keys.end(), [&](const auto& k) {
      return std::get<0>(k) == r.model && std::get<1>(k) == r.rho &&
             (std::get<2>(k) == r.q_d || (std::isnan(std::get<2>(k)) && std::isnan(r.q_d)));
    });
    if (!seen) keys.push_back(key);
  }
  for (const auto& [model, rho, q] : keys) {
    std::vector<double> ar, pk, rw;
    for (const auto& r : rows)
      if (r.model == model && r.rho == rho && (r.q_d == q || (std::isnan(q) && std::isnan(r.q_d)))) {
        ar.push_back(r.metrics.answer_rate());
        pk.push_back(r.metrics.mean_pickup_time_s());
        rw.push_back(r.metrics.mean_agent_reward_s());
      }
    const Stats a = stats_of(ar), p = stats_of(pk), w = stats_of(rw);
    out << model << ',' << format_number(rho) << ',' << format_number(q) << ',' << format_number(q) << ','
        << ar.size() << ',' << format_number(a.mean) << ',' << format_number(a.sd) << ',' << format_number(p.mean)
        << ',' << format_number(p.sd) << ',' << format_number(w.mean) << ',' << format_number(w.sd) << '\n';
  }
}

void write_curves_csv(std::ostream& out, const std::vector<CurveRow>& rows) {
  out << "model,rho,q_d,q_s,replication,epoch,agents,answer_rate,mean_pickup_time_s,mean_agent_reward_s,"
         "loss,actor_loss,updates,epsilon\n";
  for (const auto& c : rows) {
    const auto& r = c.report;
    out << c.model << ',' << format_number(c.rho) << ',' << format_number(c.q_d) << ',' << format_number(c.q_s)
        << ',' << c.replication << ',' << r.epoch << ',' << r.metrics.agents << ','
        << format_number(r.metrics.answer_rate()) << ',' << format_number(r.metrics.mean_pickup_time_s()) << ','
        << format_number(r.metrics.mean_agent_reward_s()) << ',' << format_number(r.loss) << ','
        << format_number(r.actor_loss) << ',' << r.updates << ',' << format_number(r.epsilon) << '\n';
  }
}

void parallel_jobs(std::size_t count, int workers, const std::function<void(std::size_t)>& job) {
  const std::size_t threads = std::min<std::size_t>(count, static_cast<std::size_t>(std::max(1, workers)));
  if (threads <= 1) {
    for (std::size_t k = 0; k < count; ++k) job(k);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < threads; ++w)
    pool.emplace_back([&] {
      for (std::size_t k = next++; k < count; k = next++) {
        try {
          job(k);
        } catch (...) {
          std::lock_guard lock(error_mu);
          if (!error) error = std::current_exception();
          next = count;
        }
      }
    });
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace delaymatch
