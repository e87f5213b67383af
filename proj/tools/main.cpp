#include <CLI11.hpp>
#include <exception>
#include <iostream>
#include <string>

#include "genesnn/commands.hpp"
#include "genesnn/errors.hpp"

namespace {

// Exit codes: 0 success, 1 check/runtime failure, 2 config/input error.
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;

struct CommonArgs {
  std::string config_path;
  std::string output_dir;
  int workers = 0;
  long seed = -1;  // overrides the command's primary seed when >= 0
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("-c,--config", args.config_path, "experiment config (JSON)")->required();
  cmd->add_option("-o,--output-dir", args.output_dir, "override output directory");
  cmd->add_option("--workers", args.workers, "concurrent candidate evaluations");
}

genesnn::ExperimentConfig load(const CommonArgs& args) {
  genesnn::ExperimentConfig cfg = genesnn::load_config(args.config_path);
  if (!args.output_dir.empty()) cfg.output_dir = args.output_dir;
  if (args.workers > 0) cfg.workers = args.workers;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "genesnn: gene-encoded spiking networks; evolves wiring distributions and a shared "
      "gene-interaction matrix, then fine-tunes with surrogate gradients"};
  app.require_subcommand(1);

  CommonArgs evolve_args, train_args, report_args, grad_args;

  CLI::App* evolve = app.add_subcommand("evolve", "run the evolutionary search");
  add_common(evolve, evolve_args);
  int generations = 0, population = 0;
  double sigma0 = 0.0;
  std::string ablation, evolve_resume;
  evolve->add_option("--generations", generations, "override evolution.generations");
  evolve->add_option("--pop", population, "override evolution.population");
  evolve->add_option("--sigma0", sigma0, "override evolution.sigma0");
  evolve->add_option("--ablation", ablation, "preset: random|baseline|r1|r2|ste");
  evolve->add_option("--resume", evolve_resume, "resume from a cma_state.txt file");
  evolve->add_option("--seed", evolve_args.seed, "override seeds.evolution");

  CLI::App* train = app.add_subcommand("train", "surrogate-gradient fine-tuning");
  add_common(train, train_args);
  std::string genotype_path, train_resume;
  double lr = 0.0, noise = -1.0;
  int epochs = -1, batch_size = 0;
  bool run_gradcheck = false;
  train->add_option("--genotype", genotype_path, "genotype JSON to materialize");
  train->add_option("--resume", train_resume, "resume from a checkpoint.json");
  train->add_option("--lr", lr, "override training.learning_rate");
  train->add_option("--epochs", epochs, "override training.epochs");
  train->add_option("--batch-size", batch_size, "override training.batch_size");
  train->add_option("--seed", train_args.seed, "override seeds.training");
  train->add_option("--noise", noise, "evaluation-input Gaussian noise (relative L2)");
  train->add_flag("--gradcheck", run_gradcheck, "verify gradients before training");

  CLI::App* report = app.add_subcommand("report", "parameter/spike/energy accounting");
  add_common(report, report_args);
  std::string checkpoint_path;
  report->add_option("--checkpoint", checkpoint_path, "checkpoint.json to analyze")->required();

  CLI::App* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient check");
  add_common(gradcheck, grad_args);
  double tolerance = 1e-4;
  std::size_t max_coords = 0;
  bool inject_fault = false;
  gradcheck->add_option("--tolerance", tolerance, "max relative error allowed");
  gradcheck->add_option("--coords", max_coords, "subsample size (0 = every coordinate)");
  gradcheck->add_flag("--inject-fault", inject_fault,
                      "transpose G in backward (mutation test; must fail)");
  gradcheck->add_option("--seed", grad_args.seed, "override seeds.training");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return e.get_exit_code() == 0 ? 0 : kExitConfig;
  }

  try {
    if (evolve->parsed()) {
      genesnn::ExperimentConfig cfg = load(evolve_args);
      if (generations > 0) cfg.evolution.generations = generations;
      if (population > 0) cfg.evolution.population = population;
      if (sigma0 > 0.0) cfg.evolution.sigma0 = sigma0;
      if (!ablation.empty()) cfg.evolution.ablation = genesnn::ablation_from_string(ablation);
      if (evolve_args.seed >= 0) {
        cfg.seeds.evolution = static_cast<std::uint64_t>(evolve_args.seed);
      }
      return genesnn::cmd_evolve(cfg, evolve_resume);
    }
    if (train->parsed()) {
      genesnn::ExperimentConfig cfg = load(train_args);
      if (lr > 0.0) cfg.training.learning_rate = lr;
      if (epochs >= 0) cfg.training.epochs = epochs;
      if (batch_size > 0) cfg.training.batch_size = batch_size;
      if (noise >= 0.0) cfg.dataset.noise_relative_l2 = noise;
      if (train_args.seed >= 0) cfg.seeds.training = static_cast<std::uint64_t>(train_args.seed);
      if (run_gradcheck) {
        const int rc = genesnn::cmd_gradcheck(cfg, 1e-4, 400, false);
        if (rc != 0) return rc;
      }
      return genesnn::cmd_train(cfg, genotype_path, train_resume);
    }
    if (report->parsed()) {
      return genesnn::cmd_report(load(report_args), checkpoint_path);
    }
    if (gradcheck->parsed()) {
      genesnn::ExperimentConfig cfg = load(grad_args);
      if (grad_args.seed >= 0) cfg.seeds.training = static_cast<std::uint64_t>(grad_args.seed);
      return genesnn::cmd_gradcheck(cfg, tolerance, max_coords, inject_fault);
    }
  } catch (const genesnn::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const genesnn::ParseError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitConfig;
}
