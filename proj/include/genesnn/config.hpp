#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "genesnn/data.hpp"
#include "genesnn/fitness.hpp"
#include "genesnn/network.hpp"
#include "genesnn/training.hpp"

namespace genesnn {

enum class Ablation { Random, Baseline, R1Only, R2Only, Ste };

Ablation ablation_from_string(const std::string& name);
std::string ablation_to_string(Ablation a);

struct DatasetConfig {
  enum class Source { Blobs, Idx, Csv };
  Source source = Source::Blobs;
  int blob_classes = 10;
  int blob_per_class = 100;
  int blob_dim = 16;
  double blob_separation = 6.0;
  std::string idx_images, idx_labels;
  std::string csv_path, csv_label_column = "label";
  EncodingMode encoding = EncodingMode::Constant;
  double noise_relative_l2 = 0.0;  // applied to evaluation inputs only
};

struct EvolutionBlock {
  int generations = 20;
  int population = 0;  // 0 -> 4 + floor(3 ln n)
  double sigma0 = 0.3;
  int n_eval = 3;
  double lambda1 = -0.2;
  double lambda2 = -0.2;
  Ablation ablation = Ablation::Ste;
};

struct SeedBlock {
  std::uint64_t data = 1;
  std::uint64_t evolution = 2;
  std::uint64_t candidate = 3;
  std::uint64_t training = 4;
};

struct ExperimentConfig {
  NetworkSpec network;
  DatasetConfig dataset;
  EvolutionBlock evolution;
  TrainConfig training;
  SeedBlock seeds;
  int workers = 1;
  std::string output_dir = "out";
};

/// Parses and validates the JSON document; unknown keys are rejected with
/// their full field path (typo safety).
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);

nlohmann::json config_to_json(const ExperimentConfig& cfg);

/// FNV-1a 64-bit over the canonical (sorted-key) dump; embedded in artifacts.
std::string config_hash(const ExperimentConfig& cfg);

/// Builds the configured dataset (blobs/IDX/CSV) with the data seed.
Dataset build_dataset(const DatasetConfig& cfg, std::uint64_t data_seed);

/// Fresh unevolved genotype: beta1 = 1/sqrt(g), beta2 = 2/sqrt(g),
/// G ~ N(0, 1/g), seeded.
Genotype default_genotype(int genes, std::uint64_t seed);

/// The paper-style random-init control: beta1 = 1, wide clamp, G ~ N(0, 1).
Genotype random_control_genotype(int genes, std::uint64_t seed);

FitnessConfig fitness_config_for(const EvolutionBlock& evo);

}  // namespace genesnn
