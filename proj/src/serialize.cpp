#include "genesnn/serialize.hpp"

#include <cstdio>
#include <fstream>

#include "genesnn/errors.hpp"

namespace genesnn {

namespace {

nlohmann::json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path + ": cannot open");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path + ": " + e.what());
  }
}

void write_json_file(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw ParseError(path + ": cannot open for writing");
  out << j.dump(2) << '\n';
}

}  // namespace

nlohmann::json genotype_to_json(const Genotype& s) {
  const int g = s.genes();
  std::vector<double> flat;
  flat.reserve(static_cast<std::size_t>(g) * g);
  for (int i = 0; i < g; ++i)
    for (int j = 0; j < g; ++j) flat.push_back(s.interaction.entries(i, j));
  return nlohmann::json{{"g", g}, {"beta1", s.beta1}, {"beta2", s.beta2}, {"G", flat}};
}

Genotype genotype_from_json(const nlohmann::json& j) {
  try {
    const int g = j.at("g").get<int>();
    if (g < 1) throw ParseError("genotype: g must be >= 1");
    const auto flat = j.at("G").get<std::vector<double>>();
    if (flat.size() != static_cast<std::size_t>(g) * g) {
      throw ParseError("genotype: G has " + std::to_string(flat.size()) + " entries, expected " +
                       std::to_string(g * g));
    }
    Genotype s;
    s.beta1 = j.at("beta1").get<double>();
    s.beta2 = j.at("beta2").get<double>();
    if (!(s.beta1 > 0.0) || !(s.beta2 > 0.0)) {
      throw ParseError("genotype: beta1 and beta2 must be positive");
    }
    Eigen::MatrixXd m(g, g);
    for (int i = 0; i < g; ++i)
      for (int k = 0; k < g; ++k) m(i, k) = flat[static_cast<std::size_t>(i) * g + k];
    s.interaction = GeneInteraction(std::move(m));
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("genotype: ") + e.what());
  }
}

void save_genotype(const std::string& path, const Genotype& s, const std::string& config_hash) {
  nlohmann::json j = genotype_to_json(s);
  if (!config_hash.empty()) j["config_hash"] = config_hash;
  write_json_file(path, j);
}

Genotype load_genotype(const std::string& path) {
  return genotype_from_json(load_json_file(path));
}

nlohmann::json phenotype_to_json(const Phenotype& p) {
  nlohmann::json slots = nlohmann::json::array();
  for (const NeuronalEncoding& e : p.encodings) {
    std::vector<double> flat(e.entries.data(), e.entries.data() + e.entries.size());
    slots.push_back(nlohmann::json{{"channels", e.channels},
                                   {"kernel", e.kernel},
                                   {"genes", e.genes},
                                   {"entries", flat}});
  }
  const int g = p.interaction.genes();
  std::vector<double> inter;
  inter.reserve(static_cast<std::size_t>(g) * g);
  for (int i = 0; i < g; ++i)
    for (int j = 0; j < g; ++j) inter.push_back(p.interaction.entries(i, j));
  return nlohmann::json{{"g", g}, {"encodings", slots}, {"G", inter}};
}

Phenotype phenotype_from_json(const nlohmann::json& j) {
  try {
    Phenotype p;
    const int g = j.at("g").get<int>();
    const auto inter = j.at("G").get<std::vector<double>>();
    if (inter.size() != static_cast<std::size_t>(g) * g) {
      throw ParseError("phenotype: G entry count mismatch");
    }
    Eigen::MatrixXd m(g, g);
    for (int i = 0; i < g; ++i)
      for (int k = 0; k < g; ++k) m(i, k) = inter[static_cast<std::size_t>(i) * g + k];
    p.interaction = GeneInteraction(std::move(m));
    for (const nlohmann::json& slot : j.at("encodings")) {
      NeuronalEncoding e;
      e.channels = slot.at("channels").get<int>();
      e.kernel = slot.at("kernel").get<int>();
      e.genes = slot.at("genes").get<int>();
      const auto flat = slot.at("entries").get<std::vector<double>>();
      e.entries = Tensor(e.channels, e.kernel, e.kernel, e.genes);
      if (flat.size() != e.entries.size()) {
        throw ParseError("phenotype: encoding entry count mismatch");
      }
      for (std::size_t i = 0; i < flat.size(); ++i) e.entries[i] = flat[i];
      p.encodings.push_back(std::move(e));
    }
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("phenotype: ") + e.what());
  }
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  write_json_file(path, nlohmann::json{{"format", "genesnn-checkpoint"},
                                       {"epoch", ckpt.epoch},
                                       {"config_hash", ckpt.config_hash},
                                       {"genotype", genotype_to_json(ckpt.genotype)},
                                       {"phenotype", phenotype_to_json(ckpt.phenotype)}});
}

Checkpoint load_checkpoint(const std::string& path) {
  const nlohmann::json j = load_json_file(path);
  try {
    if (j.at("format").get<std::string>() != "genesnn-checkpoint") {
      throw ParseError(path + ": not a checkpoint file");
    }
    Checkpoint ckpt;
    ckpt.epoch = j.at("epoch").get<int>();
    ckpt.config_hash = j.value("config_hash", "");
    ckpt.genotype = genotype_from_json(j.at("genotype"));
    ckpt.phenotype = phenotype_from_json(j.at("phenotype"));
    return ckpt;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
}

std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

CsvWriter::CsvWriter(const std::string& path, const std::string& header,
                     const std::vector<std::pair<std::string, std::string>>& comments)
    : out_(path) {
  if (!out_) throw ParseError(path + ": cannot open for writing");
  for (const auto& [key, value] : comments) out_ << "# " << key << "=" << value << "\n";
  out_ << header << "\n";
}

void CsvWriter::row(const std::vector<double>& values) {
  std::string line;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) line += ',';
    line += format_real(values[i]);
  }
  out_ << line << "\n" << std::flush;
}

void CsvWriter::raw_row(const std::string& line) { out_ << line << "\n" << std::flush; }

}  // namespace genesnn
