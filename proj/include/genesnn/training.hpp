#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "genesnn/data.hpp"
#include "genesnn/network.hpp"

namespace genesnn {

enum class Optimizer { Sgd, Momentum, Adam };

struct TrainConfig {
  double learning_rate = 0.05;
  int epochs = 100;
  int batch_size = 64;
  int n_eval = 3;  // training epochs per fitness evaluation
  std::uint64_t seed = 0;
  Optimizer optimizer = Optimizer::Sgd;  // plain SGD keeps results optimizer-independent
  double momentum = 0.9;
  double adam_beta1 = 0.9, adam_beta2 = 0.999, adam_epsilon = 1e-8;
  double max_grad_norm = 5.0;  // global-norm clip per batch; <= 0 disables
  SpikeMode mode = SpikeMode::Binary;
  EncodingMode encoding = EncodingMode::Constant;
  bool train_interaction = true;  // G is optimized alongside the encodings
};

void validate_train(const TrainConfig& cfg);

/// Gradients in factor space: one tensor per encoding slot plus dG.
struct GradientBundle {
  std::vector<Tensor> d_encodings;
  Eigen::MatrixXd d_interaction;
};

/// Mean cross-entropy of time-averaged logits (N, classes, 1, 1) against
/// class indices.
double cross_entropy_loss(const Tensor& logits, const std::vector<int>& labels);

/// Row-wise softmax over the class axis.
Tensor softmax_rows(const Tensor& logits);

/// d(loss)/d(logits) with mean reduction: (softmax - onehot) / N.
Tensor cross_entropy_grad(const Tensor& logits, const std::vector<int>& labels);

/// Reverse-mode pass through time and layers using the surrogate derivative
/// at the spike nonlinearity, then pushes per-layer weight gradients into the
/// encoding factors and the shared interaction matrix. Gradients of shared
/// encodings accumulate contributions from both adjacent layers.
/// fault_transpose_interaction deliberately uses G in place of G^T in the
/// input-encoding push (a mutation hook for the gradient checker).
GradientBundle backward(const NetworkSpec& net, const Phenotype& phenotype,
                        const ForwardResult& fwd, const std::vector<int>& labels,
                        bool fault_transpose_interaction = false);

/// E_i <- E_i - eta * dE_i, G <- G - eta * dG (when train_interaction).
void sgd_step(Phenotype& phenotype, const GradientBundle& grads, double learning_rate,
              bool train_interaction = true);

struct OptimizerState {
  std::vector<Tensor> m_enc, v_enc;
  Eigen::MatrixXd m_int, v_int;
  long step = 0;
};

void apply_update(Phenotype& phenotype, const GradientBundle& grads, const TrainConfig& cfg,
                  OptimizerState& state);

struct EvalMetrics {
  double loss = 0.0;
  double accuracy = 0.0;
  // Summed squared step-to-step change of the readout's softmax outputs,
  // divided by the sample count (the bounded r1 measurement).
  double temporal_reg_per_sample = 0.0;
  std::vector<double> emitted_spikes;  // per layer, batch totals
  long long input_spikes = 0;
  bool input_binary = false;
  int samples = 0;
};

/// Loss/accuracy over a dataset split, batched; also accumulates the spike
/// statistics needed by energy reports and the per-sample temporal
/// difference of the readout.
EvalMetrics evaluate_split(const NetworkSpec& net, const Phenotype& phenotype,
                           const Dataset& data, const std::vector<int>& indices,
                           const TrainConfig& cfg, std::uint64_t encode_seed,
                           double noise_relative_l2 = 0.0, std::uint64_t noise_seed = 0);

struct TrainResult {
  std::vector<double> loss_history;  // mean batch loss per epoch
  std::vector<double> acc_history;   // train-split accuracy per epoch
  int first_epoch = 0;
};

/// Mini-batch training on the train split. Shuffling is seeded per epoch
/// (mix of cfg.seed and the epoch index), so resuming at first_epoch
/// reproduces an uninterrupted run. Throws DivergenceError on NaN loss.
TrainResult train(const NetworkSpec& net, Phenotype& phenotype, const Dataset& data,
                  const TrainConfig& cfg, int first_epoch = 0);

struct GradCheckReport {
  double max_rel_error = 0.0;
  double mean_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t coords_checked = 0;
  std::string worst_coordinate;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;

  bool passed(double tolerance) const { return max_rel_error < tolerance; }
};

/// Central finite differences of the smoothed-mode loss against backward()
/// on every coordinate (or a seeded subsample of at least min(total, 200)
/// when max_coords > 0). Relative error uses |a - n| / max(1e-4, |a| + |n|).
GradCheckReport grad_check(const NetworkSpec& net, const Phenotype& phenotype,
                           const EncodedBatch& batch, const std::vector<int>& labels,
                           double step = 1e-5, std::size_t max_coords = 0,
                           std::uint64_t seed = 0, bool fault_transpose_interaction = false);

}  // namespace genesnn
