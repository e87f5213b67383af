#include "genesnn/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <tuple>
#include <vector>

#include "genesnn/cma_es.hpp"
#include "genesnn/energy.hpp"
#include "genesnn/errors.hpp"
#include "genesnn/rng.hpp"
#include "genesnn/serialize.hpp"

namespace genesnn {

namespace {

std::string artifact_path(const ExperimentConfig& cfg, const std::string& name) {
  std::filesystem::create_directories(cfg.output_dir);
  return (std::filesystem::path(cfg.output_dir) / name).string();
}

Eigen::VectorXd initial_mean(int genes) {
  Eigen::VectorXd m = Eigen::VectorXd::Zero(2 + genes * genes);
  m[0] = 1.0 / std::sqrt(static_cast<double>(genes));
  m[1] = 2.0 / std::sqrt(static_cast<double>(genes));
  return m;
}

}  // namespace

int cmd_evolve(const ExperimentConfig& cfg, const std::string& resume_path) {
  const std::string hash = config_hash(cfg);
  const Dataset data = build_dataset(cfg.dataset, cfg.seeds.data);

  if (cfg.evolution.ablation == Ablation::Random) {
    // Control preset: no evolution, emit a standard-normal genotype.
    const Genotype s = random_control_genotype(cfg.network.genes, cfg.seeds.evolution);
    save_genotype(artifact_path(cfg, "best_genotype.json"), s, hash);
    std::cout << "evolve: random control genotype written (no evolution)\n";
    return 0;
  }

  const FitnessConfig fitness_cfg = fitness_config_for(cfg.evolution);
  TrainConfig eval_train = cfg.training;
  eval_train.n_eval = cfg.evolution.n_eval;

  struct Row {
    int generation, candidate;
    double loss, r1, r2, fitness;
    std::uint64_t seed;
  };
  std::vector<Row> rows;
  std::mutex rows_mutex;

  const CandidateEvaluator evaluator = [&](const Genotype& candidate, int generation,
                                           int index) -> double {
    const std::uint64_t seed = mix_seed(cfg.seeds.candidate, generation, index);
    const CandidateDiagnostics diag = evaluate_candidate(candidate, cfg.network, data, eval_train,
                                                         fitness_cfg, generation, seed);
    {
      std::lock_guard<std::mutex> lock(rows_mutex);
      rows.push_back({generation, index, diag.loss, diag.r1, diag.r2, diag.fitness, seed});
    }
    return diag.fitness;
  };

  EvolutionConfig evo;
  evo.generations = cfg.evolution.generations;
  evo.population = cfg.evolution.population;
  evo.sigma0 = cfg.evolution.sigma0;
  evo.seed = cfg.seeds.evolution;
  evo.workers = cfg.workers;
  evo.mean0 = initial_mean(cfg.network.genes);

  CmaEs state = [&] {
    if (resume_path.empty()) return CmaEs(evo.mean0, evo.sigma0, evo.population);
    std::ifstream in(resume_path);
    if (!in) throw ConfigError(resume_path + ": cannot open resume file");
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return CmaEs::deserialize(text);
  }();

  const EvolutionResult result = run_evolution(cfg.network.genes, evaluator, evo, &state);

  {
    CsvWriter evolution_csv(
        artifact_path(cfg, "evolution.csv"),
        "generation,best_f,median_f,sigma,min_eig_C,max_eig_C,beta1_mean,beta2_mean",
        {{"config_hash", hash}});
    for (const GenerationStats& s : result.history) {
      evolution_csv.row({static_cast<double>(s.generation), s.best_f, s.median_f, s.sigma,
                         s.min_eig, s.max_eig, s.beta1_mean, s.beta2_mean});
    }
  }
  {
    std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
      return std::tie(a.generation, a.candidate) < std::tie(b.generation, b.candidate);
    });
    CsvWriter candidates_csv(artifact_path(cfg, "candidates.csv"),
                             "generation,candidate,L,r1,r2,f,seed", {{"config_hash", hash}});
    for (const Row& r : rows) {
      char line[256];
      std::snprintf(line, sizeof(line), "%d,%d,%s,%s,%s,%s,%llu", r.generation, r.candidate,
                    format_real(r.loss).c_str(), format_real(r.r1).c_str(),
                    format_real(r.r2).c_str(), format_real(r.fitness).c_str(),
                    static_cast<unsigned long long>(r.seed));
      candidates_csv.raw_row(line);
    }
  }
  save_genotype(artifact_path(cfg, "best_genotype.json"), result.best, hash);
  {
    std::ofstream out(artifact_path(cfg, "cma_state.txt"));
    out << state.serialize();
  }
  std::cout << "evolve: " << result.history.size() << " generation(s), best fitness "
            << format_real(result.best_fitness) << "\n";
  return 0;
}

int cmd_train(const ExperimentConfig& cfg, const std::string& genotype_path,
              const std::string& resume_path) {
  const std::string hash = config_hash(cfg);
  const Dataset data = build_dataset(cfg.dataset, cfg.seeds.data);

  Checkpoint ckpt;
  int first_epoch = 0;
  if (!resume_path.empty()) {
    ckpt = load_checkpoint(resume_path);
    first_epoch = ckpt.epoch;
  } else {
    ckpt.genotype = genotype_path.empty()
                        ? default_genotype(cfg.network.genes, cfg.seeds.training)
                        : load_genotype(genotype_path);
    if (ckpt.genotype.genes() != cfg.network.genes) {
      throw ConfigError("genotype has g = " + std::to_string(ckpt.genotype.genes()) +
                        " but network.genes = " + std::to_string(cfg.network.genes));
    }
    ckpt.phenotype =
        sample_phenotype(cfg.network, ckpt.genotype, mix_seed(cfg.seeds.training, 0x5A11));
  }
  ckpt.config_hash = hash;

  TrainConfig train_cfg = cfg.training;
  train_cfg.seed = cfg.seeds.training;

  CsvWriter metrics(artifact_path(cfg, "metrics.csv"), "epoch,loss,accuracy",
                    {{"config_hash", hash}});
  if (train_cfg.epochs > first_epoch) {
    const TrainResult history = train(cfg.network, ckpt.phenotype, data, train_cfg, first_epoch);
    for (std::size_t i = 0; i < history.loss_history.size(); ++i) {
      metrics.row({static_cast<double>(first_epoch + static_cast<int>(i)),
                   history.loss_history[i], history.acc_history[i]});
    }
    ckpt.epoch = train_cfg.epochs;
  } else {
    // --epochs 0: untrained evaluation only.
    const EvalMetrics m = evaluate_split(cfg.network, ckpt.phenotype, data, data.train_idx,
                                         train_cfg, mix_seed(cfg.seeds.training, 0xE0));
    metrics.row({0.0, m.loss, m.accuracy});
  }
  save_checkpoint(artifact_path(cfg, "checkpoint.json"), ckpt);

  const EvalMetrics test = evaluate_split(cfg.network, ckpt.phenotype, data, data.test_idx,
                                          train_cfg, mix_seed(cfg.seeds.training, 0x7E57),
                                          cfg.dataset.noise_relative_l2,
                                          mix_seed(cfg.seeds.data, 0x4015E));
  std::cout << "train: epoch " << ckpt.epoch << ", test loss " << format_real(test.loss)
            << ", test accuracy " << format_real(test.accuracy) << "\n";
  return 0;
}

int cmd_report(const ExperimentConfig& cfg, const std::string& checkpoint_path) {
  const Dataset data = build_dataset(cfg.dataset, cfg.seeds.data);
  const Checkpoint ckpt = load_checkpoint(checkpoint_path);

  TrainConfig eval_cfg = cfg.training;
  eval_cfg.seed = cfg.seeds.training;
  const EvalMetrics test = evaluate_split(cfg.network, ckpt.phenotype, data, data.test_idx,
                                          eval_cfg, mix_seed(cfg.seeds.data, 0x7E57),
                                          cfg.dataset.noise_relative_l2,
                                          mix_seed(cfg.seeds.data, 0x4015E));
  const EnergyReport energy = energy_report(cfg.network, test.emitted_spikes, test.input_spikes,
                                            test.input_binary, test.samples);

  // Parameter accounting per layer (each layer's own triple), plus the
  // actual stored total, which counts shared encodings once.
  const SlotPlan plan = plan_encoding_slots(cfg.network);
  std::vector<LayerShape> shapes = layer_output_shapes(cfg.network);
  LayerShape in{cfg.network.input_channels, cfg.network.input_height, cfg.network.input_width};
  long long genetic_total = 0, dense_total = 0;
  std::printf("layer  kind   genetic_params  dense_params  ratio\n");
  for (std::size_t l = 0; l < cfg.network.layers.size(); ++l) {
    const LayerSpec& spec = cfg.network.layers[l];
    const int k = spec.kind == LayerKind::Conv ? spec.kernel : 1;
    const int c_in = spec.kind == LayerKind::Conv ? in.channels : static_cast<int>(in.flat());
    const long long genetic = genetic_param_count(cfg.network.genes, c_in, spec.out_channels, k);
    const long long dense = dense_param_count(c_in, spec.out_channels, k);
    genetic_total += genetic;
    dense_total += dense;
    std::printf("%-6zu %-6s %-15lld %-13lld %.4f\n", l,
                spec.kind == LayerKind::Conv ? "conv" : "dense", genetic, dense,
                static_cast<double>(genetic) / static_cast<double>(dense));
    in = shapes[l];
  }
  const long long stored = phenotype_param_count(ckpt.phenotype);
  std::printf("sum of per-layer triples: %lld (dense %lld)\n", genetic_total, dense_total);
  std::printf("stored parameters (shared encodings once): %lld, compression %.4f\n", stored,
              static_cast<double>(stored) / static_cast<double>(dense_total));
  if (static_cast<double>(stored) >= static_cast<double>(dense_total)) {
    std::printf("note: no compression at this scale; needs g << min(C_in k^2, C_out k^2)\n");
  }

  std::printf("\nlayer  flops        fr_in      energy_pJ\n");
  for (std::size_t l = 0; l < energy.flops.size(); ++l) {
    std::printf("%-6zu %-12lld %-10.6f %.6f\n", l, energy.flops[l], energy.firing_rates[l],
                energy.layer_energy_pj[l]);
  }
  std::printf("total spikes: %lld over %d sample(s), T = %d\n", energy.spike_total,
              energy.samples, energy.time_steps);
  std::printf("energy: %s pJ (%.6g mJ) per sample; SOPs = %s\n",
              format_real(energy.energy_pj).c_str(), energy.energy_pj * 1e-9,
              format_real(energy.sops).c_str());
  std::printf("test loss %.6f, test accuracy %.4f\n", test.loss, test.accuracy);

  std::ofstream out(artifact_path(cfg, "energy.csv"));
  out << "# config_hash=" << config_hash(cfg) << "\n" << energy_report_csv(energy);
  return 0;
}

int cmd_gradcheck(const ExperimentConfig& cfg, double tolerance, std::size_t max_coords,
                  bool inject_fault) {
  const Dataset data = build_dataset(cfg.dataset, cfg.seeds.data);
  const Genotype genotype = default_genotype(cfg.network.genes, cfg.seeds.training);
  const Phenotype phenotype =
      sample_phenotype(cfg.network, genotype, mix_seed(cfg.seeds.training, 0x5A11));

  const std::size_t batch_n = std::min<std::size_t>(8, data.train_idx.size());
  const Tensor samples = gather_samples(data, data.train_idx, 0, batch_n);
  const std::vector<int> labels = gather_labels(data, data.train_idx, 0, batch_n);
  const EncodedBatch batch = encode_spikes(samples, cfg.network.time_steps, cfg.dataset.encoding,
                                           mix_seed(cfg.seeds.data, 0x6C));

  const GradCheckReport report = grad_check(cfg.network, phenotype, batch, labels, 1e-5,
                                            max_coords, cfg.seeds.training, inject_fault);
  std::printf("gradcheck: %zu coordinate(s), max relative error %s, mean %s\n",
              report.coords_checked, format_real(report.max_rel_error).c_str(),
              format_real(report.mean_rel_error).c_str());
  std::printf("worst coordinate %s: analytic %s vs numeric %s\n",
              report.worst_coordinate.c_str(), format_real(report.worst_analytic).c_str(),
              format_real(report.worst_numeric).c_str());
  if (!report.passed(tolerance)) {
    std::printf("FAIL: tolerance %s exceeded\n", format_real(tolerance).c_str());
    return 1;
  }
  std::printf("PASS: within tolerance %s\n", format_real(tolerance).c_str());
  return 0;
}

}  // namespace genesnn
