#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "genesnn/tensor.hpp"

namespace genesnn {

/// Globally shared g x g matrix mixing gene channels.
struct GeneInteraction {
  Eigen::MatrixXd entries;

  GeneInteraction() = default;
  explicit GeneInteraction(Eigen::MatrixXd m);

  int genes() const { return static_cast<int>(entries.rows()); }

  static GeneInteraction identity(int genes);
};

/// Per-layer gene encoding: each channel/kernel position carries a
/// g-dimensional gene vector. Entries tensor has shape (channels, k, k, g).
struct NeuronalEncoding {
  int channels = 0;
  int kernel = 0;
  int genes = 0;
  Tensor entries;
};

/// The evolvable object: wiring distribution (beta1 = pre-clamp std dev,
/// beta2 = clamp bound) plus the shared interaction matrix.
struct Genotype {
  double beta1 = 0.0;
  double beta2 = 0.0;
  GeneInteraction interaction;

  int genes() const { return interaction.genes(); }
};

/// Draws entries as N(0, beta1^2) clamped to [-beta2, beta2]. The clamp puts
/// point mass on the boundary; there is no rejection resampling.
NeuronalEncoding sample_encoding(double beta1, double beta2, int channels, int kernel,
                                 int genes, std::uint64_t seed);

/// W[c_out, c_in, u, v] = sum_{a,b} E_in[c_in,u,v,a] * G[a,b] * E_out[c_out,u,v,b].
/// The gene axis is contracted independently at each kernel position, so a
/// dense layer is the k = 1 special case. Output shape (C_out, C_in, k, k).
Tensor materialize_weights(const NeuronalEncoding& input_enc, const GeneInteraction& interaction,
                           const NeuronalEncoding& output_enc);

/// Stored reals of one (E_in, G, E_out) triple: g * (C_in*k^2 + g + C_out*k^2).
long long genetic_param_count(int genes, int c_in, int c_out, int kernel);

/// Conventional weight count C_out * C_in * k^2, for compression-ratio reports.
long long dense_param_count(int c_in, int c_out, int kernel);

struct SvdFactors {
  Eigen::MatrixXd input_factor;   // m x g, U' * sqrt(S')
  GeneInteraction interaction;    // identity g x g
  Eigen::MatrixXd output_factor;  // n x g, V' * sqrt(S')
};

/// Builds factors from the top-g singular triplets of w, so that
/// input_factor * G * output_factor^T is the best rank-g Frobenius
/// approximation of w (exact when rank(w) <= g).
SvdFactors svd_construct(const Eigen::MatrixXd& w, int genes);

/// Repair rule for unconstrained evolution proposals: |b| floored at 1e-6.
double repair_beta(double b);

/// Flat layout [beta1, beta2, row-major G], dimension 2 + g^2.
std::vector<double> genotype_flatten(const Genotype& s);

/// Inverse of genotype_flatten; beta slots are passed through repair_beta.
Genotype genotype_unflatten(const std::vector<double>& v, int genes);

}  // namespace genesnn
