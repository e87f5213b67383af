#pragma once

#include <cstdint>
#include <vector>

#include "genesnn/data.hpp"
#include "genesnn/genome.hpp"
#include "genesnn/network.hpp"
#include "genesnn/training.hpp"

namespace genesnn {

/// Generation-scheduled fitness f = L - e^(lambda1 t) r1 - e^(lambda2 t) r2,
/// minimized. Negative exponents make the regularizers fade with generations.
struct FitnessConfig {
  double lambda1 = -0.2;
  double lambda2 = -0.2;
  bool use_temporal_reg = true;
  bool use_entropy_reg = true;
  double entropy_epsilon = 1e-12;
};

void validate_fitness(const FitnessConfig& cfg);

/// r1 = sum over the T-1 consecutive step pairs of ||Y(t+1) - Y(t)||_F^2.
double temporal_diff_reg(const std::vector<Tensor>& step_outputs);

/// r2 = Shannon entropy of P = |G| / sum|G| (eps-guarded log, clamped at 0).
/// An all-zero matrix yields 0 with a warning.
double spatial_entropy_reg(const GeneInteraction& interaction, double eps = 1e-12);

double fitness_value(double loss, double r1, double r2, long generation,
                     const FitnessConfig& cfg);

struct CandidateDiagnostics {
  double loss = 0.0;
  double r1 = 0.0;
  double r2 = 0.0;
  double fitness = 0.0;
  bool diverged = false;
};

/// Full candidate evaluation: samples encodings from the genotype's wiring
/// distribution, fine-tunes for cfg.n_eval epochs, measures L and r1 on the
/// held-out validation split, r2 on the genotype's interaction matrix, and
/// combines them on the generation schedule. Divergence yields NaN fitness.
CandidateDiagnostics evaluate_candidate(const Genotype& genotype, const NetworkSpec& net,
                                        const Dataset& data, const TrainConfig& train_cfg,
                                        const FitnessConfig& fitness_cfg, long generation,
                                        std::uint64_t candidate_seed);

}  // namespace genesnn
