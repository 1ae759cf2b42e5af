#include "delaymatch/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fstream>
#include <set>
#include <sstream>

namespace delaymatch {

namespace pt = boost::property_tree;

namespace {

class Reader {
 public:
  explicit Reader(const pt::ptree& tree) : tree_(tree) {}

  template <typename T>
  void read(const std::string& key, T& out) {
    used_.insert(key);
    const auto node = tree_.get_optional<std::string>(pt::ptree::path_type(key, '.'));
    if (!node) return;
    out = convert<T>(key, *node);
  }

  template <typename T>
  void read_list(const std::string& key, std::vector<T>& out) {
    used_.insert(key);
    const auto node = tree_.get_optional<std::string>(pt::ptree::path_type(key, '.'));
    if (!node) return;
    out.clear();
    std::stringstream ss(*node);
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      if (!item.empty()) out.push_back(convert<T>(key, item));
    }
  }

  void reject_unknown() const {
    for (const auto& [section, body] : tree_) {
      if (body.empty() && !body.data().empty())
        throw ConfigError(section, "key outside of any section");
      for (const auto& [key, value] : body) {
        (void)value;
        const std::string path = section + "." + key;
        if (!used_.count(path)) throw ConfigError(path, "unknown key");
      }
    }
  }

 private:
  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
  }

  template <typename T>
  static T convert(const std::string& key, const std::string& raw) {
    const std::string s = trim(raw);
    if constexpr (std::is_same_v<T, std::string>) {
      return s;
    } else if constexpr (std::is_same_v<T, bool>) {
      if (s == "true" || s == "1" || s == "yes") return true;
      if (s == "false" || s == "0" || s == "no") return false;
      throw ConfigError(key, "expected a boolean, got '" + s + "'");
    } else {
      std::istringstream ss(s);
      T v{};
      ss >> v;
      if (!ss || !ss.eof()) throw ConfigError(key, "cannot parse '" + s + "'");
      return v;
    }
  }

  const pt::ptree& tree_;
  std::set<std::string> used_;
};

void read_gaussian(Reader& rd, const std::string& section, GaussianArrivalSpec& g) {
  rd.read(section + ".mean_x_km", g.mean.x_km);
  rd.read(section + ".mean_y_km", g.mean.y_km);
  rd.read(section + ".std_x_km", g.std_x_km);
  rd.read(section + ".std_y_km", g.std_y_km);
  rd.read(section + ".rate", g.rate_per_interval);
}

template <typename F>
void check(const std::string& field, F&& fn) {
  try {
    fn();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(field, e.what());
  }
}

}  // namespace

void ExperimentConfig::validate() const {
  check("area", [&] { environment.area.validate(); });
  if (environment.horizon < 1) throw ConfigError("environment.horizon", "must be >= 1");
  if (environment.kind == EnvironmentKind::custom) {
    check("passengers", [&] { environment.passengers.validate(); });
    check("drivers", [&] { environment.drivers.validate(); });
  } else {
    if (requests_csv.empty()) throw ConfigError("calibrated.requests_csv", "required for kind = calibrated");
    if (shifts_csv.empty()) throw ConfigError("calibrated.shifts_csv", "required for kind = calibrated");
    if (!std::filesystem::exists(requests_csv))
      throw ConfigError("calibrated.requests_csv", "file not found: " + requests_csv.string());
    if (!std::filesystem::exists(shifts_csv))
      throw ConfigError("calibrated.shifts_csv", "file not found: " + shifts_csv.string());
  }
  check("reward", [&] { training.reward.validate(); });
  check("training", [&] { training.validate(); });
  if (replications < 1) throw ConfigError("experiment.replications", "must be >= 1");
  if (eval_episodes < 1) throw ConfigError("experiment.eval_episodes", "must be >= 1");
  if (workers < 1) throw ConfigError("experiment.workers", "must be >= 1");
  for (const auto& m : models)
    if (m != "pure" && m != "tabq" && m != "dqn" && m != "a2c")
      throw ConfigError("experiment.models", "unknown model '" + m + "'");
  for (double r : rho_values)
    if (!(r >= 0.0 && r <= 1.0)) throw ConfigError("experiment.rho_values", "values must lie in [0, 1]");
  for (double q : arrival_rates)
    if (!(q >= 0.0)) throw ConfigError("experiment.arrival_rates", "values must be >= 0");
}

ExperimentConfig default_custom_config() { return ExperimentConfig{}; }

ExperimentConfig default_calibrated_config() {
  ExperimentConfig cfg;
  cfg.environment.kind = EnvironmentKind::calibrated;
  cfg.environment.area = AreaConfig{20.0, 20.0, 20, 20, 25.0, 1.0};
  cfg.calibrated.area = cfg.environment.area;
  cfg.arrival_rates = {};
  return cfg;
}

ExperimentConfig parse_config(std::istream& in, const std::filesystem::path& base_dir) {
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("line " + std::to_string(e.line()), e.message());
  }
  Reader rd(tree);

  std::string kind = "custom";
  rd.read("environment.kind", kind);
  ExperimentConfig cfg = kind == "calibrated" ? default_calibrated_config() : default_custom_config();
  if (kind != "custom" && kind != "calibrated")
    throw ConfigError("environment.kind", "expected custom or calibrated, got '" + kind + "'");

  auto& env = cfg.environment;
  rd.read("area.width_km", env.area.width_km);
  rd.read("area.height_km", env.area.height_km);
  rd.read("area.grid_rows", env.area.grid_rows);
  rd.read("area.grid_cols", env.area.grid_cols);
  rd.read("area.speed_kmh", env.area.speed_kmh);
  rd.read("area.interval_seconds", env.area.interval_seconds);

  rd.read("environment.horizon", env.horizon);
  std::string mode = "poisson";
  rd.read("environment.arrival_mode", mode);
  if (mode == "poisson")
    env.arrival_mode = ArrivalMode::poisson;
  else if (mode == "deterministic")
    env.arrival_mode = ArrivalMode::deterministic;
  else
    throw ConfigError("environment.arrival_mode", "expected poisson or deterministic, got '" + mode + "'");

  read_gaussian(rd, "passengers", env.passengers);
  read_gaussian(rd, "drivers", env.drivers);

  std::string requests, shifts;
  rd.read("calibrated.requests_csv", requests);
  rd.read("calibrated.shifts_csv", shifts);
  if (!requests.empty()) cfg.requests_csv = base_dir / requests;
  if (!shifts.empty()) cfg.shifts_csv = base_dir / shifts;
  rd.read("calibrated.center_lng", cfg.calibrated.center_lng);
  rd.read("calibrated.center_lat", cfg.calibrated.center_lat);
  rd.read("calibrated.period_seconds", cfg.calibrated.period_seconds);
  rd.read("calibrated.resample", cfg.calibrated.resample);
  std::int64_t origin = -1;
  rd.read("calibrated.epoch_origin", origin);
  if (origin >= 0) cfg.calibrated.epoch_origin = origin;
  rd.read("calibrated.start_interval", env.start_interval);
  int patience = 0;
  rd.read("calibrated.patience", patience);
  if (patience > 0) env.patience = patience;
  cfg.calibrated.area = env.area;

  auto& tr = cfg.training;
  rd.read("reward.V", tr.reward.match_benefit_V);
  rd.read("reward.rho", tr.reward.rho);
  rd.read("reward.gamma", tr.reward.gamma);
  rd.read("reward.expiry_penalty", tr.reward.expiry_penalty);

  rd.read("training.epochs", tr.epochs);
  rd.read("training.dqn_updates", tr.dqn_updates);
  rd.read("training.a2c_updates", tr.a2c_updates);
  rd.read("training.batch_size", tr.batch_size);
  rd.read("training.target_sync_period", tr.target_sync_period);
  rd.read("training.q_learning_rate", tr.q_learning_rate);
  rd.read("training.actor_learning_rate", tr.actor_learning_rate);
  rd.read("training.replay_capacity", tr.replay_capacity);
  rd.read("training.epsilon_start", tr.epsilon.start);
  rd.read("training.epsilon_end", tr.epsilon.end);
  tr.epsilon.decay_epochs = -1;
  rd.read("training.epsilon_decay_epochs", tr.epsilon.decay_epochs);
  if (tr.epsilon.decay_epochs < 0) tr.epsilon.decay_epochs = std::max(1, tr.epochs / 2);
  rd.read("training.grad_clip_norm", tr.grad_clip_norm);
  rd.read("training.normalize_advantage", tr.normalize_advantage);
  rd.read("training.tabular_alpha", tr.tabular_alpha);
  rd.read_list("training.hidden", tr.hidden);
  rd.read("training.count_scale", tr.features.count_scale);

  rd.read_list("experiment.models", cfg.models);
  rd.read_list("experiment.arrival_rates", cfg.arrival_rates);
  rd.read_list("experiment.rho_values", cfg.rho_values);
  rd.read("experiment.replications", cfg.replications);
  rd.read("experiment.eval_episodes", cfg.eval_episodes);
  rd.read("experiment.seed", cfg.seed);
  std::string out_dir;
  rd.read("experiment.output_dir", out_dir);
  if (!out_dir.empty()) cfg.output_dir = out_dir;
  rd.read("experiment.workers", cfg.workers);
  rd.read("experiment.write_episode_logs", cfg.write_episode_logs);

  rd.reject_unknown();
  tr.seed = cfg.seed;
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open " + path.string());
  return parse_config(in, path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path());
}

}  // namespace delaymatch
