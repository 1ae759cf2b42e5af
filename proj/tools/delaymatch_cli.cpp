#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <iostream>
#include <optional>
#include <random>
#include <string>

#include "delaymatch/calibrated.hpp"
#include "delaymatch/checkpoint.hpp"
#include "delaymatch/config.hpp"
#include "delaymatch/harness.hpp"
#include "delaymatch/mlp.hpp"

namespace dm = delaymatch;

namespace {

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<int> epochs;
  bool quiet = false;
};

void add_common(CLI::App* cmd, CommonFlags& f, bool with_epochs) {
  cmd->add_option("--config", f.config, "experiment configuration (INI)");
  cmd->add_option("--seed", f.seed, "override experiment.seed");
  cmd->add_option("--out", f.out, "override experiment.output_dir");
  if (with_epochs) cmd->add_option("--epochs", f.epochs, "override training.epochs")->check(CLI::PositiveNumber);
  cmd->add_flag("--quiet", f.quiet, "suppress progress lines");
}

dm::ExperimentConfig resolve(const CommonFlags& f) {
  dm::ExperimentConfig cfg = f.config.empty() ? dm::default_custom_config() : dm::load_config(f.config);
  if (f.seed) cfg.seed = cfg.training.seed = *f.seed;
  if (!f.out.empty()) cfg.output_dir = f.out;
  if (f.epochs) {
    const bool default_decay = cfg.training.epsilon.decay_epochs == std::max(1, cfg.training.epochs / 2);
    cfg.training.epochs = *f.epochs;
    if (default_decay) cfg.training.epsilon.decay_epochs = std::max(1, *f.epochs / 2);
  }
  cfg.validate();
  return cfg;
}

void print_rows(const std::vector<dm::MetricsRow>& rows) { dm::write_metrics_csv(std::cout, rows); }

int fail(const std::string& kind, const std::string& message, const std::string& field = {}) {
  nlohmann::json err{{"error", kind}, {"message", message}};
  if (!field.empty()) err["field"] = field;
  std::cerr << err.dump() << std::endl;
  return kind == "usage" ? 2 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Delayed ride-hailing matching: simulator, learners and experiment harness"};
  app.require_subcommand(1);

  CommonFlags common;
  std::string model = "a2c";

  auto* simulate = app.add_subcommand("simulate", "run pure-optimization episodes and write metrics");
  add_common(simulate, common, false);

  auto* train = app.add_subcommand("train", "train and evaluate one learner on every arrival setting");
  add_common(train, common, true);
  train->add_option("--model", model, "learner")->check(CLI::IsMember({"pure", "tabq", "dqn", "a2c"}));

  auto* sweep = app.add_subcommand("sweep-rho", "A2C at each reward weight plus the pure-optimization reference");
  add_common(sweep, common, true);

  std::string checkpoint;
  int episodes = 0;
  auto* evaluate = app.add_subcommand("evaluate", "evaluate a saved policy without exploration or learning");
  add_common(evaluate, common, false);
  evaluate->add_option("--model", model, "learner")->check(CLI::IsMember({"pure", "tabq", "dqn", "a2c"}));
  evaluate->add_option("--checkpoint", checkpoint, "checkpoint (.ckpt) or Q-table (.csv)");
  evaluate->add_option("--episodes", episodes, "evaluation episodes (default experiment.eval_episodes)");

  dm::SyntheticTableConfig synth;
  std::string requests_name = "requests.csv", shifts_name = "shifts.csv";
  std::uint64_t gen_seed = 1;
  std::string gen_out = "data";
  auto* gen = app.add_subcommand("gen-data", "write synthetic request and shift tables");
  gen->add_option("--out", gen_out, "output directory");
  gen->add_option("--seed", gen_seed, "random seed");
  gen->add_option("--intervals", synth.intervals, "number of 1 s intervals covered")->check(CLI::PositiveNumber);
  gen->add_option("--request-rate", synth.request_rate, "requests per interval")->check(CLI::NonNegativeNumber);
  gen->add_option("--shift-rate", synth.shift_rate, "driver shifts starting per interval")
      ->check(CLI::NonNegativeNumber);
  gen->add_option("--mean-shift-seconds", synth.mean_shift_seconds, "mean shift length")
      ->check(CLI::PositiveNumber);

  int nets = 20;
  std::uint64_t grad_seed = 7;
  auto* grad = app.add_subcommand("gradcheck", "finite-difference check of network gradients");
  grad->add_option("--networks", nets, "random networks to check")->check(CLI::PositiveNumber);
  grad->add_option("--seed", grad_seed, "random seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", e.what());
  }

  try {
    std::ostream* progress = common.quiet ? nullptr : &std::cerr;
    if (*simulate) {
      print_rows(dm::simulate_baseline(resolve(common), progress).metrics);
    } else if (*train) {
      dm::ExperimentConfig cfg = resolve(common);
      cfg.models = {model};
      print_rows(dm::run_experiment(cfg, progress).metrics);
    } else if (*sweep) {
      print_rows(dm::sweep_rho(resolve(common), progress).metrics);
    } else if (*evaluate) {
      const dm::ExperimentConfig cfg = resolve(common);
      if (model != "pure" && checkpoint.empty()) return fail("usage", "--checkpoint is required for " + model);
      const int n = episodes > 0 ? episodes : cfg.eval_episodes;
      print_rows({dm::evaluate_checkpoint(cfg, model, checkpoint, n, cfg.seed)});
    } else if (*gen) {
      std::filesystem::create_directories(gen_out);
      dm::Rng rng(gen_seed);
      const std::filesystem::path dir(gen_out);
      dm::generate_synthetic_tables(synth, rng, dir / requests_name, dir / shifts_name);
      std::cout << (dir / requests_name).string() << '\n' << (dir / shifts_name).string() << '\n';
    } else if (*grad) {
      dm::Rng rng(grad_seed);
      std::uniform_int_distribution<Eigen::Index> width(1, 8);
      double worst = 0.0;
      for (int k = 0; k < nets; ++k) {
        dm::MlpSpec spec;
        spec.input_dim = width(rng);
        spec.hidden = {width(rng), width(rng)};
        spec.output_dim = 1 + width(rng) % 3;
        spec.head = k % 2 ? dm::OutputHead::softmax : dm::OutputHead::linear;
        const auto rep = dm::gradient_check(spec, rng);
        worst = std::max(worst, rep.max_relative_error);
        std::cout << "network " << k << " params " << rep.parameters_checked << " max_relative_error "
                  << rep.max_relative_error << '\n';
      }
      std::cout << "worst " << worst << '\n';
      if (!(worst < 1e-4)) return fail("gradcheck", "relative error above 1e-4");
    }
  } catch (const dm::ConfigError& e) {
    return fail("config", e.what(), e.field());
  } catch (const std::exception& e) {
    return fail("runtime", e.what());
  }
  return EXIT_SUCCESS;
}
