#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "idlegrad/experiment.hpp"

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// Fill in the output directory: CLI flag beats the config value beats
// $IDLEGRAD_OUT_DIR/<name> beats out/<name>.
void resolve_out_dir(idlegrad::ExperimentConfig& cfg,
                     const std::string& flag_value) {
  if (!flag_value.empty()) {
    cfg.out_dir = flag_value;
    return;
  }
  if (!cfg.out_dir.empty()) return;
  const char* base = std::getenv("IDLEGRAD_OUT_DIR");
  cfg.out_dir =
      (std::filesystem::path(base != nullptr ? base : "out") / cfg.name)
          .string();
}

int execute(const idlegrad::ExperimentConfig& cfg) {
  if (cfg.step.rule == "grid") {
    const auto summaries = idlegrad::run_grid(cfg, &std::cout);
    std::cout << "wrote " << summaries.size() << " step-size runs under "
              << cfg.out_dir << "\n";
  } else {
    const auto summary = idlegrad::run_experiment(cfg, &std::cout);
    if (!std::isnan(summary.savings_percent))
      std::cout << "cost saving vs standard: " << summary.savings_percent
                << "%\n";
    std::cout << "wrote " << cfg.out_dir << "/report.json\n";
  }
  return 0;
}

int print_bounds(const idlegrad::ExperimentConfig& cfg) {
  const idlegrad::BuiltProblem built = idlegrad::build_problem(cfg);
  const size_t points =
      cfg.step.rule == "grid" ? cfg.step.values.size() : 1;
  for (size_t i = 0; i < points; ++i) {
    const double alpha = idlegrad::resolve_alpha(cfg, built.prob, i);
    const auto sched = idlegrad::resolve_schedule(cfg, built.prob, alpha);
    const auto b =
        idlegrad::compute_bounds(built.prob, built.spec, sched, alpha);
    std::cout << "alpha " << alpha << "  (" << idlegrad::schedule_formula(sched)
              << ")\n"
              << "  p_min " << b.p_min << "  delta " << b.delta << "  eta "
              << b.eta << "\n"
              << "  lambda2 " << b.lambda2 << "  lambda_min " << b.lambda_min
              << "  beta_sq " << b.beta_sq << "  1-beta " << b.one_minus_beta
              << "\n"
              << "  neighborhood_const " << b.neighborhood_const
              << "  grad_error_const " << b.grad_error_const << "\n"
              << "  disagreement_sq_bound " << b.disagreement_sq_bound
              << "  rate_constant " << b.rate_constant << "\n"
              << "  penalty_grad_sq " << b.penalty_grad_sq
              << "  sum_sqrt_idle " << b.sum_sqrt_idle << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distributed projected-gradient simulator with node idling"};
  app.require_subcommand(1);

  std::string config_path, out_dir, preset_name, data_path;
  std::uint64_t seed = 0;
  int replicas = 0;
  long budget = 0;
  bool dump_config = false, list_presets = false;

  CLI::App* run_cmd = app.add_subcommand("run", "run a config file");
  run_cmd->add_option("--config", config_path, "JSON experiment config")
      ->required();
  run_cmd->add_option("--out", out_dir, "output directory override");

  CLI::App* preset_cmd =
      app.add_subcommand("preset", "run a named built-in experiment");
  preset_cmd->add_option("name", preset_name, "preset name");
  preset_cmd->add_flag("--list", list_presets, "list preset names and exit");
  preset_cmd->add_option("--out", out_dir, "output directory override");
  preset_cmd->add_option("--seed", seed, "master seed override");
  preset_cmd->add_option("--replicas", replicas, "replica count override");
  preset_cmd->add_option("--budget", budget, "iteration budget override");
  preset_cmd->add_option("--data", data_path, "dataset file override");
  preset_cmd->add_flag("--dump-config", dump_config,
                       "print the resolved config instead of running");

  CLI::App* check_cmd =
      app.add_subcommand("check", "run the fast invariant suite");

  CLI::App* bounds_cmd =
      app.add_subcommand("bounds", "print theory constants for a config");
  bounds_cmd->add_option("--config", config_path, "JSON experiment config")
      ->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run_cmd->parsed()) {
      idlegrad::ExperimentConfig cfg =
          idlegrad::parse_config(slurp(config_path));
      resolve_out_dir(cfg, out_dir);
      return execute(cfg);
    }
    if (preset_cmd->parsed()) {
      if (list_presets) {
        for (const std::string& name : idlegrad::preset_names())
          std::cout << name << "\n";
        return 0;
      }
      if (preset_name.empty())
        throw std::runtime_error("preset needs a name (or --list)");
      idlegrad::ExperimentConfig cfg = idlegrad::preset_config(preset_name);
      if (seed != 0) cfg.run.seed = seed;
      if (replicas != 0) cfg.run.replicas = replicas;
      if (budget != 0) cfg.run.budget = budget;
      if (!data_path.empty()) cfg.dataset.path = data_path;
      resolve_out_dir(cfg, out_dir);
      if (dump_config) {
        std::cout << idlegrad::serialize_config(cfg);
        return 0;
      }
      return execute(cfg);
    }
    if (check_cmd->parsed()) {
      const int failures = idlegrad::run_check(std::cout);
      std::cout << (failures == 0 ? "all checks passed\n"
                                  : "some checks FAILED\n");
      return failures == 0 ? 0 : 1;
    }
    if (bounds_cmd->parsed()) {
      return print_bounds(idlegrad::parse_config(slurp(config_path)));
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
