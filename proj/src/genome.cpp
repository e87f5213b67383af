#include "genesnn/genome.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <string>

#include "genesnn/errors.hpp"
#include "genesnn/rng.hpp"

namespace genesnn {

GeneInteraction::GeneInteraction(Eigen::MatrixXd m) : entries(std::move(m)) {
  if (entries.rows() < 1 || entries.rows() != entries.cols()) {
    throw std::invalid_argument("GeneInteraction: matrix must be square with g >= 1, got " +
                                std::to_string(entries.rows()) + "x" +
                                std::to_string(entries.cols()));
  }
  if (!entries.allFinite()) throw std::invalid_argument("GeneInteraction: non-finite entries");
}

GeneInteraction GeneInteraction::identity(int genes) {
  return GeneInteraction(Eigen::MatrixXd::Identity(genes, genes));
}

NeuronalEncoding sample_encoding(double beta1, double beta2, int channels, int kernel,
                                 int genes, std::uint64_t seed) {
  if (!(beta1 > 0.0) || !(beta2 > 0.0)) {
    throw std::invalid_argument("sample_encoding: beta1 and beta2 must be positive");
  }
  if (channels < 1 || kernel < 1 || genes < 1) {
    throw std::invalid_argument("sample_encoding: dimensions must be >= 1");
  }
  NeuronalEncoding e;
  e.channels = channels;
  e.kernel = kernel;
  e.genes = genes;
  e.entries = Tensor(channels, kernel, kernel, genes);
  RandomEngine rng(seed);
  for (std::size_t i = 0; i < e.entries.size(); ++i) {
    e.entries[i] = std::clamp(beta1 * rng.normal(), -beta2, beta2);
  }
  return e;
}

Tensor materialize_weights(const NeuronalEncoding& input_enc, const GeneInteraction& interaction,
                           const NeuronalEncoding& output_enc) {
  const int g = interaction.genes();
  if (input_enc.genes != g || output_enc.genes != g) {
    throw ShapeError("materialize_weights: gene counts disagree (" +
                     std::to_string(input_enc.genes) + ", " + std::to_string(g) + ", " +
                     std::to_string(output_enc.genes) + ")");
  }
  if (input_enc.kernel != output_enc.kernel) {
    throw ShapeError("materialize_weights: kernel sizes disagree (" +
                     std::to_string(input_enc.kernel) + " vs " +
                     std::to_string(output_enc.kernel) + ")");
  }
  const int c_in = input_enc.channels;
  const int c_out = output_enc.channels;
  const int k = input_enc.kernel;

  Tensor w(c_out, c_in, k, k);
  Eigen::MatrixXd ein(c_in, g), eout(c_out, g);
  for (int u = 0; u < k; ++u) {
    for (int v = 0; v < k; ++v) {
      for (int c = 0; c < c_in; ++c)
        for (int a = 0; a < g; ++a) ein(c, a) = input_enc.entries(c, u, v, a);
      for (int c = 0; c < c_out; ++c)
        for (int a = 0; a < g; ++a) eout(c, a) = output_enc.entries(c, u, v, a);
      const Eigen::MatrixXd wuv = ein * interaction.entries * eout.transpose();  // C_in x C_out
      for (int co = 0; co < c_out; ++co)
        for (int ci = 0; ci < c_in; ++ci) w(co, ci, u, v) = wuv(ci, co);
    }
  }
  return w;
}

long long genetic_param_count(int genes, int c_in, int c_out, int kernel) {
  if (genes < 1 || c_in < 1 || c_out < 1 || kernel < 1) {
    throw std::invalid_argument("genetic_param_count: arguments must be >= 1");
  }
  const long long g = genes, k2 = static_cast<long long>(kernel) * kernel;
  return g * (c_in * k2 + g + c_out * k2);
}

long long dense_param_count(int c_in, int c_out, int kernel) {
  if (c_in < 1 || c_out < 1 || kernel < 1) {
    throw std::invalid_argument("dense_param_count: arguments must be >= 1");
  }
  return static_cast<long long>(c_out) * c_in * kernel * kernel;
}

SvdFactors svd_construct(const Eigen::MatrixXd& w, int genes) {
  const int m = static_cast<int>(w.rows());
  const int n = static_cast<int>(w.cols());
  if (genes < 1 || genes > std::min(m, n)) {
    throw std::invalid_argument("svd_construct: need 1 <= g <= min(m, n), got g = " +
                                std::to_string(genes) + " for " + std::to_string(m) + "x" +
                                std::to_string(n));
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(w, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success) throw NumericalError("svd_construct: SVD failed");

  const Eigen::VectorXd root = svd.singularValues().head(genes).cwiseSqrt();
  SvdFactors f;
  f.input_factor = svd.matrixU().leftCols(genes) * root.asDiagonal();
  f.output_factor = svd.matrixV().leftCols(genes) * root.asDiagonal();
  f.interaction = GeneInteraction::identity(genes);
  return f;
}

double repair_beta(double b) { return std::max(std::fabs(b), 1e-6); }

std::vector<double> genotype_flatten(const Genotype& s) {
  const int g = s.genes();
  std::vector<double> v;
  v.reserve(2 + static_cast<std::size_t>(g) * g);
  v.push_back(s.beta1);
  v.push_back(s.beta2);
  for (int i = 0; i < g; ++i)
    for (int j = 0; j < g; ++j) v.push_back(s.interaction.entries(i, j));
  return v;
}

Genotype genotype_unflatten(const std::vector<double>& v, int genes) {
  if (genes < 1) throw std::invalid_argument("genotype_unflatten: genes must be >= 1");
  const std::size_t expected = 2 + static_cast<std::size_t>(genes) * genes;
  if (v.size() != expected) {
    throw ShapeError("genotype_unflatten: expected length " + std::to_string(expected) +
                     " for g = " + std::to_string(genes) + ", got " + std::to_string(v.size()));
  }
  Genotype s;
  s.beta1 = repair_beta(v[0]);
  s.beta2 = repair_beta(v[1]);
  Eigen::MatrixXd g_mat(genes, genes);
  std::size_t idx = 2;
  for (int i = 0; i < genes; ++i)
    for (int j = 0; j < genes; ++j) g_mat(i, j) = v[idx++];
  s.interaction = GeneInteraction(std::move(g_mat));
  return s;
}

}  // namespace genesnn
