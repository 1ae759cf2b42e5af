#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "delaymatch/calibrated.hpp"
#include "delaymatch/learners.hpp"
#include "delaymatch/simulator.hpp"

namespace delaymatch {

/// Thrown for invalid configuration; what() starts with the offending
/// "section.key" path.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& field, const std::string& what)
      : std::runtime_error(field + ": " + what), field_(field) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

struct ExperimentConfig {
  EnvironmentConfig environment;
  std::filesystem::path requests_csv;
  std::filesystem::path shifts_csv;
  CalibratedOptions calibrated;

  TrainingConfig training;

  std::vector<std::string> models{"pure", "tabq", "dqn", "a2c"};
  std::vector<double> arrival_rates{1.0, 2.0, 3.0};  // q^d = q^s settings
  std::vector<double> rho_values{0.0, 0.25, 0.5, 0.75, 1.0};
  int replications = 5;
  int eval_episodes = 50;
  std::uint64_t seed = 1;
  std::filesystem::path output_dir = "results";
  int workers = 1;
  bool write_episode_logs = true;

  void validate() const;
};

/// Parses an INI document ([section] / key = value, ';' or '#' comments).
/// Relative table paths resolve against the config file's directory.
ExperimentConfig load_config(const std::filesystem::path& path);
ExperimentConfig parse_config(std::istream& in, const std::filesystem::path& base_dir = ".");

/// Defaults for the 4 km × 4 km custom environment.
ExperimentConfig default_custom_config();
/// Defaults for the 20 km × 20 km calibrated environment.
ExperimentConfig default_calibrated_config();

}  // namespace delaymatch
