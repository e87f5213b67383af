#include "genesnn/fitness.hpp"

#include <cmath>
#include <iostream>
#include <limits>
#include <stdexcept>

#include "genesnn/errors.hpp"
#include "genesnn/rng.hpp"

namespace genesnn {

void validate_fitness(const FitnessConfig& cfg) {
  if (cfg.lambda1 > 0.0 || cfg.lambda2 > 0.0) {
    throw std::invalid_argument(
        "FitnessConfig: lambda1 and lambda2 must be <= 0 (regularizers decay)");
  }
  if (!(cfg.entropy_epsilon > 0.0)) {
    throw std::invalid_argument("FitnessConfig: entropy_epsilon must be > 0");
  }
}

double temporal_diff_reg(const std::vector<Tensor>& step_outputs) {
  if (step_outputs.empty()) throw std::invalid_argument("temporal_diff_reg: T must be >= 1");
  double r1 = 0.0;
  for (std::size_t t = 1; t < step_outputs.size(); ++t) {
    if (!step_outputs[t].same_shape(step_outputs[t - 1])) {
      throw ShapeError("temporal_diff_reg: step tensors must share one shape");
    }
    Tensor diff = step_outputs[t];
    diff -= step_outputs[t - 1];
    r1 += diff.squared_norm();
  }
  return r1;
}

double spatial_entropy_reg(const GeneInteraction& interaction, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("spatial_entropy_reg: eps must be > 0");
  const double total = interaction.entries.cwiseAbs().sum();
  if (total == 0.0) {
    std::cerr << "[fitness] warning: all-zero interaction matrix, entropy defined as 0\n";
    return 0.0;
  }
  double entropy = 0.0;
  const int g = interaction.genes();
  for (int i = 0; i < g; ++i) {
    for (int j = 0; j < g; ++j) {
      const double p = std::fabs(interaction.entries(i, j)) / total;
      if (p > 0.0) entropy -= p * std::log(p + eps);
    }
  }
  return std::max(entropy, 0.0);
}

double fitness_value(double loss, double r1, double r2, long generation,
                     const FitnessConfig& cfg) {
  if (generation < 0) throw std::invalid_argument("fitness_value: generation must be >= 0");
  const double t = static_cast<double>(generation);
  const double w1 = cfg.use_temporal_reg ? std::exp(cfg.lambda1 * t) : 0.0;
  const double w2 = cfg.use_entropy_reg ? std::exp(cfg.lambda2 * t) : 0.0;
  return loss - w1 * r1 - w2 * r2;
}

CandidateDiagnostics evaluate_candidate(const Genotype& genotype, const NetworkSpec& net,
                                        const Dataset& data, const TrainConfig& train_cfg,
                                        const FitnessConfig& fitness_cfg, long generation,
                                        std::uint64_t candidate_seed) {
  validate_fitness(fitness_cfg);
  CandidateDiagnostics diag;
  try {
    Phenotype phenotype = sample_phenotype(net, genotype, mix_seed(candidate_seed, 0x5A11));
    TrainConfig cfg = train_cfg;
    cfg.epochs = train_cfg.n_eval;
    cfg.seed = mix_seed(candidate_seed, 0x7121);
    if (cfg.epochs > 0) train(net, phenotype, data, cfg);

    const EvalMetrics held_out = evaluate_split(net, phenotype, data, data.val_idx, cfg,
                                                mix_seed(candidate_seed, 0xE7A1));
    diag.loss = held_out.loss;
    diag.r1 = held_out.temporal_reg_per_sample;
    diag.r2 = spatial_entropy_reg(genotype.interaction, fitness_cfg.entropy_epsilon);
    diag.fitness = fitness_value(diag.loss, diag.r1, diag.r2, generation, fitness_cfg);
    if (!std::isfinite(diag.fitness)) {
      diag.diverged = true;
      diag.fitness = std::numeric_limits<double>::quiet_NaN();
    }
  } catch (const NumericalError&) {
    diag.diverged = true;
    diag.loss = diag.r1 = diag.r2 = std::numeric_limits<double>::quiet_NaN();
    diag.fitness = std::numeric_limits<double>::quiet_NaN();
  }
  return diag;
}

}  // namespace genesnn
