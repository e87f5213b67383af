#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "genesnn/genome.hpp"
#include "genesnn/network.hpp"

namespace genesnn {

// Genotype document: {g, beta1, beta2, G: row-major array of g^2 reals}.
// nlohmann emits shortest-round-trip decimals, so 64-bit floats survive a
// write/read cycle bit-exactly.
nlohmann::json genotype_to_json(const Genotype& s);
Genotype genotype_from_json(const nlohmann::json& j);

void save_genotype(const std::string& path, const Genotype& s,
                   const std::string& config_hash = "");
Genotype load_genotype(const std::string& path);

nlohmann::json phenotype_to_json(const Phenotype& p);
Phenotype phenotype_from_json(const nlohmann::json& j);

/// Training checkpoint: phenotype + provenance genotype + epoch counter.
struct Checkpoint {
  Phenotype phenotype;
  Genotype genotype;
  int epoch = 0;
  std::string config_hash;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

/// Line-oriented CSV writer with a fixed header and %.17g reals; optional
/// leading `# key=value` comment lines (config hash embedding). Rows are
/// flushed as they are written so interrupted runs keep a usable log.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::string& header,
            const std::vector<std::pair<std::string, std::string>>& comments = {});

  void row(const std::vector<double>& values);
  void raw_row(const std::string& line);

 private:
  std::ofstream out_;
};

std::string format_real(double v);  // %.17g

}  // namespace genesnn
