#include <doctest.h>

#include <cmath>
#include <string>

#include "genesnn/config.hpp"
#include "genesnn/errors.hpp"
#include "genesnn/rng.hpp"
#include "genesnn/serialize.hpp"

using namespace genesnn;

namespace {

nlohmann::json minimal_config() {
  return nlohmann::json::parse(R"({
    "network": {
      "input": {"channels": 16},
      "genes": 4,
      "time_steps": 4,
      "layers": [
        {"kind": "dense", "out": 40},
        {"kind": "dense", "out": 10}
      ]
    },
    "dataset": {
      "source": "blobs",
      "blobs": {"classes": 10, "per_class": 100, "dim": 16, "separation": 6.0}
    },
    "evolution": {"generations": 20, "population": 8, "n_eval": 3, "ablation": "ste"},
    "training": {"learning_rate": 0.1, "epochs": 100, "batch_size": 64},
    "seeds": {"data": 1, "evolution": 2, "candidate": 3, "training": 4},
    "output_dir": "/tmp/genesnn_cfg_test"
  })");
}

}  // namespace

TEST_SUITE("config") {

TEST_CASE("a valid config parses into the expected structures") {
  const ExperimentConfig cfg = parse_config(minimal_config());
  CHECK(cfg.network.input_channels == 16);
  CHECK(cfg.network.genes == 4);
  CHECK(cfg.network.layers.size() == 2);
  CHECK(cfg.network.layers[0].out_channels == 40);
  CHECK(cfg.dataset.blob_classes == 10);
  CHECK(cfg.evolution.population == 8);
  CHECK(cfg.training.epochs == 100);
  CHECK(cfg.training.n_eval == 3);  // mirrored from the evolution block
  CHECK(cfg.seeds.candidate == 3);
}

TEST_CASE("unknown keys are rejected with their field path") {
  nlohmann::json j = minimal_config();
  j["network"]["layers"][0]["fanout"] = 3;
  try {
    parse_config(j);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("network.layers[0].fanout") != std::string::npos);
  }

  j = minimal_config();
  j["evolutoin"] = nlohmann::json::object();  // typo at the top level
  CHECK_THROWS_AS(parse_config(j), ConfigError);
}

TEST_CASE("semantic validation produces config errors") {
  nlohmann::json j = minimal_config();
  j["training"]["learning_rate"] = -0.5;
  CHECK_THROWS_AS(parse_config(j), ConfigError);

  j = minimal_config();
  j["evolution"]["lambda1"] = 0.3;  // must decay
  CHECK_THROWS_AS(parse_config(j), ConfigError);

  j = minimal_config();
  j["network"]["layers"] = nlohmann::json::array();
  CHECK_THROWS_AS(parse_config(j), ConfigError);

  j = minimal_config();
  j["dataset"]["encoding"] = "ternary";
  CHECK_THROWS_AS(parse_config(j), ConfigError);
}

TEST_CASE("config hash is stable and sensitive to changes") {
  const ExperimentConfig a = parse_config(minimal_config());
  const ExperimentConfig b = parse_config(minimal_config());
  CHECK(config_hash(a) == config_hash(b));
  CHECK(config_hash(a).size() == 16);

  nlohmann::json j = minimal_config();
  j["training"]["epochs"] = 101;
  CHECK(config_hash(parse_config(j)) != config_hash(a));
}

TEST_CASE("default and random-control genotypes are seeded and valid") {
  const Genotype d1 = default_genotype(4, 9);
  const Genotype d2 = default_genotype(4, 9);
  CHECK(d1.beta1 == doctest::Approx(0.5));
  CHECK(d1.beta2 == doctest::Approx(1.0));
  CHECK((d1.interaction.entries - d2.interaction.entries).norm() == 0.0);

  const Genotype r = random_control_genotype(4, 9);
  CHECK(r.beta1 == 1.0);
  CHECK(r.beta2 >= 10.0);
}

TEST_CASE("genotype JSON round trip is bit-faithful") {
  RandomEngine rng(19);
  Eigen::MatrixXd g(3, 3);
  for (int i = 0; i < 9; ++i) g.data()[i] = rng.normal() * std::pow(10.0, (int)rng.below(6) - 3);
  const Genotype s{0.1234567890123456789, 1.9876543210987654321, GeneInteraction(g)};

  const std::string path = "/tmp/genesnn_genotype_roundtrip.json";
  save_genotype(path, s, "deadbeef00000000");
  const Genotype back = load_genotype(path);
  CHECK(back.beta1 == s.beta1);  // bitwise
  CHECK(back.beta2 == s.beta2);
  CHECK((back.interaction.entries - s.interaction.entries).norm() == 0.0);
}

TEST_CASE("checkpoint round trip preserves the phenotype bitwise") {
  NetworkSpec net;
  net.input_channels = 6;
  net.genes = 3;
  net.time_steps = 2;
  LayerSpec h;
  h.out_channels = 5;
  LayerSpec r;
  r.out_channels = 2;
  net.layers = {h, r};

  Checkpoint ckpt;
  ckpt.genotype = default_genotype(3, 21);
  ckpt.phenotype = sample_phenotype(net, ckpt.genotype, 22);
  ckpt.epoch = 17;
  ckpt.config_hash = "0123456789abcdef";

  const std::string path = "/tmp/genesnn_checkpoint_roundtrip.json";
  save_checkpoint(path, ckpt);
  const Checkpoint back = load_checkpoint(path);
  CHECK(back.epoch == 17);
  CHECK(back.config_hash == ckpt.config_hash);
  REQUIRE(back.phenotype.encodings.size() == ckpt.phenotype.encodings.size());
  for (std::size_t s = 0; s < back.phenotype.encodings.size(); ++s) {
    CHECK(max_abs_diff(back.phenotype.encodings[s].entries,
                       ckpt.phenotype.encodings[s].entries) == 0.0);
  }
  CHECK((back.phenotype.interaction.entries - ckpt.phenotype.interaction.entries).norm() == 0.0);
}

TEST_CASE("ablation names map both ways") {
  for (const char* name : {"random", "baseline", "r1", "r2", "ste"}) {
    CHECK(ablation_to_string(ablation_from_string(name)) == name);
  }
  CHECK_THROWS_AS(ablation_from_string("stee"), ConfigError);
}

TEST_CASE("build_dataset dispatches on the source") {
  DatasetConfig ds;
  ds.blob_classes = 3;
  ds.blob_per_class = 20;
  ds.blob_dim = 4;
  const Dataset d = build_dataset(ds, 33);
  CHECK(d.num_classes == 3);
  CHECK(d.size() == 60);

  DatasetConfig missing;
  missing.source = DatasetConfig::Source::Idx;
  missing.idx_images = "/nonexistent.idx";
  missing.idx_labels = "/nonexistent.idx";
  CHECK_THROWS_AS(build_dataset(missing, 33), ParseError);
}

}  // TEST_SUITE
