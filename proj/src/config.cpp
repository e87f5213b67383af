#include "genesnn/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <stdexcept>

#include "genesnn/errors.hpp"
#include "genesnn/rng.hpp"

namespace genesnn {

namespace {

void require_keys(const nlohmann::json& obj, const std::string& path,
                  const std::set<std::string>& allowed) {
  if (!obj.is_object()) throw ConfigError(path + ": expected an object");
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.count(key)) throw ConfigError(path + "." + key + ": unknown key");
  }
}

template <typename T>
T get_or(const nlohmann::json& obj, const std::string& path, const char* key, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(path + "." + key + ": wrong type");
  }
}

LifConfig parse_lif(const nlohmann::json& j, const std::string& path, const LifConfig& base) {
  require_keys(j, path, {"tau", "v_threshold", "v_reset", "surrogate_width"});
  LifConfig lif = base;
  lif.tau = get_or(j, path, "tau", lif.tau);
  lif.v_threshold = get_or(j, path, "v_threshold", lif.v_threshold);
  lif.v_reset = get_or(j, path, "v_reset", lif.v_reset);
  lif.surrogate_width = get_or(j, path, "surrogate_width", lif.surrogate_width);
  return lif;
}

}  // namespace

Ablation ablation_from_string(const std::string& name) {
  if (name == "random") return Ablation::Random;
  if (name == "baseline") return Ablation::Baseline;
  if (name == "r1") return Ablation::R1Only;
  if (name == "r2") return Ablation::R2Only;
  if (name == "ste") return Ablation::Ste;
  throw ConfigError("evolution.ablation: unknown preset '" + name +
                    "' (expected random|baseline|r1|r2|ste)");
}

std::string ablation_to_string(Ablation a) {
  switch (a) {
    case Ablation::Random: return "random";
    case Ablation::Baseline: return "baseline";
    case Ablation::R1Only: return "r1";
    case Ablation::R2Only: return "r2";
    case Ablation::Ste: return "ste";
  }
  return "ste";
}

ExperimentConfig parse_config(const nlohmann::json& j) {
  require_keys(j, "config",
               {"network", "dataset", "evolution", "training", "seeds", "workers", "output_dir"});
  ExperimentConfig cfg;

  if (!j.contains("network")) throw ConfigError("config.network: required");
  {
    const nlohmann::json& net = j.at("network");
    require_keys(net, "network", {"input", "genes", "time_steps", "layers", "lif"});
    const nlohmann::json& input = net.at("input");
    require_keys(input, "network.input", {"channels", "height", "width"});
    cfg.network.input_channels = get_or(input, "network.input", "channels", 1);
    cfg.network.input_height = get_or(input, "network.input", "height", 1);
    cfg.network.input_width = get_or(input, "network.input", "width", 1);
    cfg.network.genes = get_or(net, "network", "genes", 4);
    cfg.network.time_steps = get_or(net, "network", "time_steps", 4);
    LifConfig base_lif;
    if (net.contains("lif")) base_lif = parse_lif(net.at("lif"), "network.lif", base_lif);
    if (!net.contains("layers")) throw ConfigError("network.layers: required");
    int index = 0;
    for (const nlohmann::json& layer : net.at("layers")) {
      const std::string path = "network.layers[" + std::to_string(index++) + "]";
      require_keys(layer, path, {"kind", "out", "kernel", "stride", "padding", "lif"});
      LayerSpec spec;
      const std::string kind = get_or<std::string>(layer, path, "kind", "dense");
      if (kind == "conv") {
        spec.kind = LayerKind::Conv;
      } else if (kind == "dense") {
        spec.kind = LayerKind::Dense;
      } else {
        throw ConfigError(path + ".kind: expected conv|dense, got '" + kind + "'");
      }
      spec.out_channels = get_or(layer, path, "out", 1);
      spec.kernel = get_or(layer, path, "kernel", 1);
      spec.stride = get_or(layer, path, "stride", 1);
      spec.padding = get_or(layer, path, "padding", 0);
      spec.lif = layer.contains("lif") ? parse_lif(layer.at("lif"), path + ".lif", base_lif)
                                       : base_lif;
      cfg.network.layers.push_back(spec);
    }
  }

  if (j.contains("dataset")) {
    const nlohmann::json& ds = j.at("dataset");
    require_keys(ds, "dataset",
                 {"source", "blobs", "idx", "csv", "encoding", "noise_relative_l2"});
    const std::string source = get_or<std::string>(ds, "dataset", "source", "blobs");
    if (source == "blobs") {
      cfg.dataset.source = DatasetConfig::Source::Blobs;
    } else if (source == "idx") {
      cfg.dataset.source = DatasetConfig::Source::Idx;
    } else if (source == "csv") {
      cfg.dataset.source = DatasetConfig::Source::Csv;
    } else {
      throw ConfigError("dataset.source: expected blobs|idx|csv, got '" + source + "'");
    }
    if (ds.contains("blobs")) {
      const nlohmann::json& b = ds.at("blobs");
      require_keys(b, "dataset.blobs", {"classes", "per_class", "dim", "separation"});
      cfg.dataset.blob_classes = get_or(b, "dataset.blobs", "classes", cfg.dataset.blob_classes);
      cfg.dataset.blob_per_class =
          get_or(b, "dataset.blobs", "per_class", cfg.dataset.blob_per_class);
      cfg.dataset.blob_dim = get_or(b, "dataset.blobs", "dim", cfg.dataset.blob_dim);
      cfg.dataset.blob_separation =
          get_or(b, "dataset.blobs", "separation", cfg.dataset.blob_separation);
    }
    if (ds.contains("idx")) {
      const nlohmann::json& b = ds.at("idx");
      require_keys(b, "dataset.idx", {"images", "labels"});
      cfg.dataset.idx_images = get_or<std::string>(b, "dataset.idx", "images", "");
      cfg.dataset.idx_labels = get_or<std::string>(b, "dataset.idx", "labels", "");
    }
    if (ds.contains("csv")) {
      const nlohmann::json& b = ds.at("csv");
      require_keys(b, "dataset.csv", {"path", "label_column"});
      cfg.dataset.csv_path = get_or<std::string>(b, "dataset.csv", "path", "");
      cfg.dataset.csv_label_column =
          get_or<std::string>(b, "dataset.csv", "label_column", "label");
    }
    const std::string enc = get_or<std::string>(ds, "dataset", "encoding", "constant");
    if (enc == "constant") {
      cfg.dataset.encoding = EncodingMode::Constant;
    } else if (enc == "poisson") {
      cfg.dataset.encoding = EncodingMode::Poisson;
    } else {
      throw ConfigError("dataset.encoding: expected constant|poisson, got '" + enc + "'");
    }
    cfg.dataset.noise_relative_l2 = get_or(ds, "dataset", "noise_relative_l2", 0.0);
    if (cfg.dataset.noise_relative_l2 < 0.0) {
      throw ConfigError("dataset.noise_relative_l2: must be >= 0");
    }
  }

  if (j.contains("evolution")) {
    const nlohmann::json& evo = j.at("evolution");
    require_keys(evo, "evolution",
                 {"generations", "population", "sigma0", "n_eval", "lambda1", "lambda2",
                  "ablation"});
    cfg.evolution.generations = get_or(evo, "evolution", "generations", cfg.evolution.generations);
    cfg.evolution.population = get_or(evo, "evolution", "population", cfg.evolution.population);
    cfg.evolution.sigma0 = get_or(evo, "evolution", "sigma0", cfg.evolution.sigma0);
    cfg.evolution.n_eval = get_or(evo, "evolution", "n_eval", cfg.evolution.n_eval);
    cfg.evolution.lambda1 = get_or(evo, "evolution", "lambda1", cfg.evolution.lambda1);
    cfg.evolution.lambda2 = get_or(evo, "evolution", "lambda2", cfg.evolution.lambda2);
    cfg.evolution.ablation =
        ablation_from_string(get_or<std::string>(evo, "evolution", "ablation", "ste"));
    if (cfg.evolution.generations < 1) throw ConfigError("evolution.generations: must be >= 1");
    if (cfg.evolution.lambda1 > 0.0 || cfg.evolution.lambda2 > 0.0) {
      throw ConfigError("evolution.lambda1/lambda2: must be <= 0 (decaying schedule)");
    }
  }

  if (j.contains("training")) {
    const nlohmann::json& tr = j.at("training");
    require_keys(tr, "training",
                 {"learning_rate", "epochs", "batch_size", "optimizer", "momentum"});
    cfg.training.learning_rate =
        get_or(tr, "training", "learning_rate", cfg.training.learning_rate);
    cfg.training.epochs = get_or(tr, "training", "epochs", cfg.training.epochs);
    cfg.training.batch_size = get_or(tr, "training", "batch_size", cfg.training.batch_size);
    cfg.training.momentum = get_or(tr, "training", "momentum", cfg.training.momentum);
    const std::string opt = get_or<std::string>(tr, "training", "optimizer", "sgd");
    if (opt == "sgd") {
      cfg.training.optimizer = Optimizer::Sgd;
    } else if (opt == "momentum") {
      cfg.training.optimizer = Optimizer::Momentum;
    } else if (opt == "adam") {
      cfg.training.optimizer = Optimizer::Adam;
    } else {
      throw ConfigError("training.optimizer: expected sgd|momentum|adam, got '" + opt + "'");
    }
    if (!(cfg.training.learning_rate > 0.0)) {
      throw ConfigError("training.learning_rate: must be > 0");
    }
    if (cfg.training.epochs < 0) throw ConfigError("training.epochs: must be >= 0");
    if (cfg.training.batch_size < 1) throw ConfigError("training.batch_size: must be >= 1");
  }

  if (j.contains("seeds")) {
    const nlohmann::json& s = j.at("seeds");
    require_keys(s, "seeds", {"data", "evolution", "candidate", "training"});
    cfg.seeds.data = get_or<std::uint64_t>(s, "seeds", "data", cfg.seeds.data);
    cfg.seeds.evolution = get_or<std::uint64_t>(s, "seeds", "evolution", cfg.seeds.evolution);
    cfg.seeds.candidate = get_or<std::uint64_t>(s, "seeds", "candidate", cfg.seeds.candidate);
    cfg.seeds.training = get_or<std::uint64_t>(s, "seeds", "training", cfg.seeds.training);
  }

  cfg.workers = get_or(j, "config", "workers", 1);
  if (cfg.workers < 1) throw ConfigError("config.workers: must be >= 1");
  cfg.output_dir = get_or<std::string>(j, "config", "output_dir", cfg.output_dir);

  cfg.training.encoding = cfg.dataset.encoding;
  cfg.training.n_eval = cfg.evolution.n_eval;
  try {
    validate_network(cfg.network);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("network: ") + e.what());
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return parse_config(j);
}

nlohmann::json config_to_json(const ExperimentConfig& cfg) {
  nlohmann::json layers = nlohmann::json::array();
  for (const LayerSpec& l : cfg.network.layers) {
    layers.push_back(
        nlohmann::json{{"kind", l.kind == LayerKind::Conv ? "conv" : "dense"},
                       {"out", l.out_channels},
                       {"kernel", l.kernel},
                       {"stride", l.stride},
                       {"padding", l.padding},
                       {"lif",
                        {{"tau", l.lif.tau},
                         {"v_threshold", l.lif.v_threshold},
                         {"v_reset", l.lif.v_reset},
                         {"surrogate_width", l.lif.surrogate_width}}}});
  }
  return nlohmann::json{
      {"network",
       {{"input",
         {{"channels", cfg.network.input_channels},
          {"height", cfg.network.input_height},
          {"width", cfg.network.input_width}}},
        {"genes", cfg.network.genes},
        {"time_steps", cfg.network.time_steps},
        {"layers", layers}}},
      {"dataset",
       {{"source", cfg.dataset.source == DatasetConfig::Source::Blobs
                       ? "blobs"
                       : (cfg.dataset.source == DatasetConfig::Source::Idx ? "idx" : "csv")},
        {"blobs",
         {{"classes", cfg.dataset.blob_classes},
          {"per_class", cfg.dataset.blob_per_class},
          {"dim", cfg.dataset.blob_dim},
          {"separation", cfg.dataset.blob_separation}}},
        {"idx", {{"images", cfg.dataset.idx_images}, {"labels", cfg.dataset.idx_labels}}},
        {"csv", {{"path", cfg.dataset.csv_path}, {"label_column", cfg.dataset.csv_label_column}}},
        {"encoding", cfg.dataset.encoding == EncodingMode::Constant ? "constant" : "poisson"},
        {"noise_relative_l2", cfg.dataset.noise_relative_l2}}},
      {"evolution",
       {{"generations", cfg.evolution.generations},
        {"population", cfg.evolution.population},
        {"sigma0", cfg.evolution.sigma0},
        {"n_eval", cfg.evolution.n_eval},
        {"lambda1", cfg.evolution.lambda1},
        {"lambda2", cfg.evolution.lambda2},
        {"ablation", ablation_to_string(cfg.evolution.ablation)}}},
      {"training",
       {{"learning_rate", cfg.training.learning_rate},
        {"epochs", cfg.training.epochs},
        {"batch_size", cfg.training.batch_size},
        {"optimizer", cfg.training.optimizer == Optimizer::Sgd
                          ? "sgd"
                          : (cfg.training.optimizer == Optimizer::Momentum ? "momentum" : "adam")},
        {"momentum", cfg.training.momentum}}},
      {"seeds",
       {{"data", cfg.seeds.data},
        {"evolution", cfg.seeds.evolution},
        {"candidate", cfg.seeds.candidate},
        {"training", cfg.seeds.training}}},
      {"workers", cfg.workers},
      {"output_dir", cfg.output_dir}};
}

std::string config_hash(const ExperimentConfig& cfg) {
  const std::string dump = config_to_json(cfg).dump();  // sorted keys: canonical
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : dump) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Dataset build_dataset(const DatasetConfig& cfg, std::uint64_t data_seed) {
  switch (cfg.source) {
    case DatasetConfig::Source::Blobs:
      return make_blobs(cfg.blob_classes, cfg.blob_per_class, cfg.blob_dim, cfg.blob_separation,
                        data_seed);
    case DatasetConfig::Source::Idx:
      return load_idx_dataset(cfg.idx_images, cfg.idx_labels, data_seed);
    case DatasetConfig::Source::Csv:
      return load_csv(cfg.csv_path, CsvSchema{cfg.csv_label_column, true}, data_seed);
  }
  throw ConfigError("dataset.source: unreachable");
}

Genotype default_genotype(int genes, std::uint64_t seed) {
  Genotype s;
  s.beta1 = 1.0 / std::sqrt(static_cast<double>(genes));
  s.beta2 = 2.0 / std::sqrt(static_cast<double>(genes));
  RandomEngine rng(mix_seed(seed, 0xD6F0));
  Eigen::MatrixXd g_mat(genes, genes);
  const double scale = 1.0 / std::sqrt(static_cast<double>(genes));
  for (int i = 0; i < genes; ++i)
    for (int j = 0; j < genes; ++j) g_mat(i, j) = scale * rng.normal();
  s.interaction = GeneInteraction(std::move(g_mat));
  return s;
}

Genotype random_control_genotype(int genes, std::uint64_t seed) {
  Genotype s;
  s.beta1 = 1.0;
  s.beta2 = 100.0;  // effectively unclamped
  RandomEngine rng(mix_seed(seed, 0xAD0));
  Eigen::MatrixXd g_mat(genes, genes);
  for (int i = 0; i < genes; ++i)
    for (int j = 0; j < genes; ++j) g_mat(i, j) = rng.normal();
  s.interaction = GeneInteraction(std::move(g_mat));
  return s;
}

FitnessConfig fitness_config_for(const EvolutionBlock& evo) {
  FitnessConfig f;
  f.lambda1 = evo.lambda1;
  f.lambda2 = evo.lambda2;
  switch (evo.ablation) {
    case Ablation::Baseline:
    case Ablation::Random:
      f.use_temporal_reg = false;
      f.use_entropy_reg = false;
      break;
    case Ablation::R1Only:
      f.use_entropy_reg = false;
      break;
    case Ablation::R2Only:
      f.use_temporal_reg = false;
      break;
    case Ablation::Ste:
      break;
  }
  return f;
}

}  // namespace genesnn
