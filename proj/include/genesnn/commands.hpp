#pragma once

#include <string>

#include "genesnn/config.hpp"

namespace genesnn {

// Exit codes shared by the CLI: 0 success, 1 check/runtime failure,
// 2 configuration or input error. The functions write their artifacts into
// cfg.output_dir and print a short summary to stdout.

/// Runs the evolutionary search (or the random-init control) and writes
/// best_genotype.json, evolution.csv, candidates.csv and cma_state.txt.
int cmd_evolve(const ExperimentConfig& cfg, const std::string& resume_path = "");

/// Fine-tunes a phenotype with surrogate-gradient descent; writes
/// checkpoint.json and metrics.csv. Starting point: --genotype file, a
/// --resume checkpoint, or the seeded default genotype.
int cmd_train(const ExperimentConfig& cfg, const std::string& genotype_path = "",
              const std::string& resume_path = "");

/// Parameter, spike and energy accounting for a trained checkpoint; writes
/// energy.csv and prints the tables.
int cmd_report(const ExperimentConfig& cfg, const std::string& checkpoint_path);

/// Finite-difference validation of the analytic gradients on the configured
/// network. Nonzero exit when the tolerance is exceeded.
int cmd_gradcheck(const ExperimentConfig& cfg, double tolerance = 1e-4,
                  std::size_t max_coords = 0, bool inject_fault = false);

}  // namespace genesnn
