#include "genesnn/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "genesnn/errors.hpp"
#include "genesnn/rng.hpp"

namespace genesnn {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Per-position factor pushes for dW of one layer:
//   dE_in  += dW_uv * E_out_uv * G^T
//   dE_out += dW_uv^T * E_in_uv * G
//   dG     += E_in_uv^T * dW_uv * E_out_uv
// where dW_uv(ci, co) = dW(co, ci, u, v).
void accumulate_factor_grads(const Tensor& d_weights, const NeuronalEncoding& input_enc,
                             const GeneInteraction& interaction,
                             const NeuronalEncoding& output_enc, Tensor& d_input_enc,
                             Tensor& d_output_enc, Eigen::MatrixXd& d_interaction,
                             bool fault_transpose_interaction) {
  const int g = interaction.genes();
  const int c_out = d_weights.dim(0), c_in = d_weights.dim(1), k = d_weights.dim(2);
  Eigen::MatrixXd ein(c_in, g), eout(c_out, g), dw(c_in, c_out);
  for (int u = 0; u < k; ++u) {
    for (int v = 0; v < k; ++v) {
      for (int c = 0; c < c_in; ++c)
        for (int a = 0; a < g; ++a) ein(c, a) = input_enc.entries(c, u, v, a);
      for (int c = 0; c < c_out; ++c)
        for (int a = 0; a < g; ++a) eout(c, a) = output_enc.entries(c, u, v, a);
      for (int co = 0; co < c_out; ++co)
        for (int ci = 0; ci < c_in; ++ci) dw(ci, co) = d_weights(co, ci, u, v);

      const Eigen::MatrixXd g_for_input =
          fault_transpose_interaction ? interaction.entries : interaction.entries.transpose();
      const Eigen::MatrixXd d_ein = dw * eout * g_for_input;
      const Eigen::MatrixXd d_eout = dw.transpose() * ein * interaction.entries;
      d_interaction.noalias() += ein.transpose() * dw * eout;

      for (int c = 0; c < c_in; ++c)
        for (int a = 0; a < g; ++a) d_input_enc(c, u, v, a) += d_ein(c, a);
      for (int c = 0; c < c_out; ++c)
        for (int a = 0; a < g; ++a) d_output_enc(c, u, v, a) += d_eout(c, a);
    }
  }
}

double phenotype_coord(const Phenotype& p, std::size_t flat) {
  for (const NeuronalEncoding& e : p.encodings) {
    if (flat < e.entries.size()) return e.entries[flat];
    flat -= e.entries.size();
  }
  const int g = p.interaction.genes();
  return p.interaction.entries(static_cast<int>(flat) / g, static_cast<int>(flat) % g);
}

void set_phenotype_coord(Phenotype& p, std::size_t flat, double value) {
  for (NeuronalEncoding& e : p.encodings) {
    if (flat < e.entries.size()) {
      e.entries[flat] = value;
      return;
    }
    flat -= e.entries.size();
  }
  const int g = p.interaction.genes();
  p.interaction.entries(static_cast<int>(flat) / g, static_cast<int>(flat) % g) = value;
}

double bundle_coord(const GradientBundle& b, std::size_t flat) {
  for (const Tensor& t : b.d_encodings) {
    if (flat < t.size()) return t[flat];
    flat -= t.size();
  }
  const int g = static_cast<int>(b.d_interaction.rows());
  return b.d_interaction(static_cast<int>(flat) / g, static_cast<int>(flat) % g);
}

std::string describe_coord(const Phenotype& p, std::size_t flat) {
  char buf[64];
  for (std::size_t s = 0; s < p.encodings.size(); ++s) {
    if (flat < p.encodings[s].entries.size()) {
      std::snprintf(buf, sizeof(buf), "encoding[%zu][%zu]", s, flat);
      return buf;
    }
    flat -= p.encodings[s].entries.size();
  }
  std::snprintf(buf, sizeof(buf), "interaction[%zu]", flat);
  return buf;
}

}  // namespace

void validate_train(const TrainConfig& cfg) {
  if (!(cfg.learning_rate > 0.0)) throw std::invalid_argument("TrainConfig: learning_rate > 0");
  if (cfg.epochs < 0) throw std::invalid_argument("TrainConfig: epochs >= 0");
  if (cfg.batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size >= 1");
  if (cfg.n_eval < 0) throw std::invalid_argument("TrainConfig: n_eval >= 0");
}

double cross_entropy_loss(const Tensor& logits, const std::vector<int>& labels) {
  const int n = logits.dim(0);
  const int classes = logits.dim(1);
  if (static_cast<int>(labels.size()) != n) {
    throw ShapeError("cross_entropy_loss: batch size mismatch");
  }
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    if (labels[i] < 0 || labels[i] >= classes) {
      throw std::out_of_range("cross_entropy_loss: label " + std::to_string(labels[i]) +
                              " out of range [0, " + std::to_string(classes) + ")");
    }
    double max_logit = -std::numeric_limits<double>::infinity();
    for (int c = 0; c < classes; ++c) max_logit = std::max(max_logit, logits(i, c, 0, 0));
    double sum_exp = 0.0;
    for (int c = 0; c < classes; ++c) sum_exp += std::exp(logits(i, c, 0, 0) - max_logit);
    total += max_logit + std::log(sum_exp) - logits(i, labels[i], 0, 0);
  }
  return total / n;
}

Tensor softmax_rows(const Tensor& logits) {
  const int n = logits.dim(0);
  const int classes = logits.dim(1);
  Tensor probs = Tensor::zeros_like(logits);
  for (int i = 0; i < n; ++i) {
    double max_logit = -std::numeric_limits<double>::infinity();
    for (int c = 0; c < classes; ++c) max_logit = std::max(max_logit, logits(i, c, 0, 0));
    double sum_exp = 0.0;
    for (int c = 0; c < classes; ++c) sum_exp += std::exp(logits(i, c, 0, 0) - max_logit);
    for (int c = 0; c < classes; ++c) {
      probs(i, c, 0, 0) = std::exp(logits(i, c, 0, 0) - max_logit) / sum_exp;
    }
  }
  return probs;
}

Tensor cross_entropy_grad(const Tensor& logits, const std::vector<int>& labels) {
  const int n = logits.dim(0);
  const int classes = logits.dim(1);
  Tensor grad = Tensor::zeros_like(logits);
  for (int i = 0; i < n; ++i) {
    double max_logit = -std::numeric_limits<double>::infinity();
    for (int c = 0; c < classes; ++c) max_logit = std::max(max_logit, logits(i, c, 0, 0));
    double sum_exp = 0.0;
    for (int c = 0; c < classes; ++c) sum_exp += std::exp(logits(i, c, 0, 0) - max_logit);
    for (int c = 0; c < classes; ++c) {
      const double p = std::exp(logits(i, c, 0, 0) - max_logit) / sum_exp;
      grad(i, c, 0, 0) = (p - (c == labels[i] ? 1.0 : 0.0)) / n;
    }
  }
  return grad;
}

GradientBundle backward(const NetworkSpec& net, const Phenotype& phenotype,
                        const ForwardResult& fwd, const std::vector<int>& labels,
                        bool fault_transpose_interaction) {
  const ForwardCache& cache = fwd.cache;
  if (cache.weights.empty() || cache.input_steps.empty()) {
    throw StateError("backward: forward() must be called with keep_cache");
  }
  const std::vector<LayerShape> shapes = layer_output_shapes(net);
  const SlotPlan plan = plan_encoding_slots(net);
  const int num_layers = static_cast<int>(net.layers.size());
  const int hidden = num_layers - 1;
  const int t_steps = net.time_steps;
  const LayerShape input_shape{net.input_channels, net.input_height, net.input_width};

  auto layer_input = [&](int l, int t) -> const Tensor& {
    return l == 0 ? cache.input_steps[t] : cache.spikes[l - 1][t];
  };
  auto in_shape_of = [&](int l) -> const LayerShape& {
    return l == 0 ? input_shape : shapes[l - 1];
  };

  // Readout: logits = mean_t Y^(t), Y^(t) = sum_{s<=t} I^(s), so the gradient
  // on the step-t current is the tail sum of the per-step logit gradients.
  Tensor d_logits = cross_entropy_grad(fwd.mean_logits, labels);
  d_logits *= 1.0 / static_cast<double>(t_steps);  // dY^(t) for every t

  std::vector<Tensor> d_weights;
  d_weights.reserve(num_layers);
  for (int l = 0; l < num_layers; ++l) d_weights.push_back(Tensor::zeros_like(cache.weights[l]));

  // d_spikes[t]: gradient on the spikes feeding the layer currently processed.
  std::vector<Tensor> d_spikes(t_steps);
  {
    const int l = num_layers - 1;
    Tensor d_current = Tensor::zeros_like(d_logits);
    for (int t = t_steps - 1; t >= 0; --t) {
      d_current += d_logits;
      Tensor d_x(layer_input(l, t).dim(0), in_shape_of(l).channels, in_shape_of(l).height,
                 in_shape_of(l).width);
      layer_backward(net.layers[l], cache.weights[l], layer_input(l, t), d_current,
                     in_shape_of(l), shapes[l], d_weights[l], d_x);
      d_spikes[t] = std::move(d_x);
    }
  }

  for (int l = hidden - 1; l >= 0; --l) {
    const LifConfig& lif = net.layers[l].lif;
    Tensor d_u_next;  // tau * du_pre(t+1), gradient on u(t) from the future
    std::vector<Tensor> d_inputs(t_steps);
    for (int t = t_steps - 1; t >= 0; --t) {
      const Tensor& u_pre = cache.u_pre[l][t];
      const Tensor& s = cache.spikes[l][t];
      Tensor d_u_pre = Tensor::zeros_like(u_pre);
      const bool have_future = !d_u_next.empty();
      for (std::size_t i = 0; i < u_pre.size(); ++i) {
        const double sg = surrogate_grad(u_pre[i], lif);
        const double du_post = have_future ? d_u_next[i] : 0.0;
        // u_post = u_pre * (1 - s) + v_reset * s; s = sigma(u_pre)
        d_u_pre[i] = sg * (d_spikes[t][i] + du_post * (lif.v_reset - u_pre[i])) +
                     du_post * (1.0 - s[i]);
      }
      Tensor d_x(layer_input(l, t).dim(0), in_shape_of(l).channels, in_shape_of(l).height,
                 in_shape_of(l).width);
      layer_backward(net.layers[l], cache.weights[l], layer_input(l, t), d_u_pre, in_shape_of(l),
                     shapes[l], d_weights[l], d_x);
      d_inputs[t] = std::move(d_x);
      d_u_pre *= lif.tau;
      d_u_next = std::move(d_u_pre);
    }
    d_spikes = std::move(d_inputs);
  }

  GradientBundle grads;
  grads.d_interaction = Eigen::MatrixXd::Zero(net.genes, net.genes);
  grads.d_encodings.reserve(plan.slots.size());
  for (const NeuronalEncoding& e : phenotype.encodings) {
    grads.d_encodings.push_back(Tensor::zeros_like(e.entries));
  }
  for (int l = 0; l < num_layers; ++l) {
    const int in_slot = plan.layer_slots[l][0], out_slot = plan.layer_slots[l][1];
    accumulate_factor_grads(d_weights[l], phenotype.encodings[in_slot], phenotype.interaction,
                            phenotype.encodings[out_slot], grads.d_encodings[in_slot],
                            grads.d_encodings[out_slot], grads.d_interaction,
                            fault_transpose_interaction);
  }
  for (std::size_t s = 0; s < grads.d_encodings.size(); ++s) {
    if (!grads.d_encodings[s].all_finite()) {
      throw NumericalError("backward: non-finite gradient in encoding slot " + std::to_string(s));
    }
  }
  if (!grads.d_interaction.allFinite()) {
    throw NumericalError("backward: non-finite gradient in interaction matrix");
  }
  return grads;
}

void sgd_step(Phenotype& phenotype, const GradientBundle& grads, double learning_rate,
              bool train_interaction) {
  for (std::size_t s = 0; s < phenotype.encodings.size(); ++s) {
    Tensor scaled = grads.d_encodings[s];
    scaled *= learning_rate;
    phenotype.encodings[s].entries -= scaled;
  }
  if (train_interaction) phenotype.interaction.entries -= learning_rate * grads.d_interaction;
}

namespace {

// Exploding factor gradients kill the spiking layers for good (membranes
// leave every surrogate window), so updates are clipped by global norm.
void clip_bundle(GradientBundle& grads, double max_norm) {
  if (max_norm <= 0.0) return;
  double norm_sq = grads.d_interaction.squaredNorm();
  for (const Tensor& t : grads.d_encodings) norm_sq += t.squared_norm();
  const double norm = std::sqrt(norm_sq);
  if (norm <= max_norm) return;
  const double scale = max_norm / norm;
  for (Tensor& t : grads.d_encodings) t *= scale;
  grads.d_interaction *= scale;
}

}  // namespace

void apply_update(Phenotype& phenotype, const GradientBundle& raw_grads, const TrainConfig& cfg,
                  OptimizerState& state) {
  GradientBundle clipped;
  const GradientBundle* grads_ptr = &raw_grads;
  if (cfg.max_grad_norm > 0.0) {
    clipped = raw_grads;
    clip_bundle(clipped, cfg.max_grad_norm);
    grads_ptr = &clipped;
  }
  const GradientBundle& grads = *grads_ptr;
  if (cfg.optimizer == Optimizer::Sgd) {
    sgd_step(phenotype, grads, cfg.learning_rate, cfg.train_interaction);
    return;
  }
  if (state.m_enc.empty()) {
    for (const Tensor& t : grads.d_encodings) {
      state.m_enc.push_back(Tensor::zeros_like(t));
      state.v_enc.push_back(Tensor::zeros_like(t));
    }
    state.m_int = Eigen::MatrixXd::Zero(grads.d_interaction.rows(), grads.d_interaction.cols());
    state.v_int = state.m_int;
  }
  ++state.step;
  if (cfg.optimizer == Optimizer::Momentum) {
    for (std::size_t s = 0; s < grads.d_encodings.size(); ++s) {
      Tensor& m = state.m_enc[s];
      for (std::size_t i = 0; i < m.size(); ++i) {
        m[i] = cfg.momentum * m[i] + grads.d_encodings[s][i];
        phenotype.encodings[s].entries[i] -= cfg.learning_rate * m[i];
      }
    }
    if (cfg.train_interaction) {
      state.m_int = cfg.momentum * state.m_int + grads.d_interaction;
      phenotype.interaction.entries -= cfg.learning_rate * state.m_int;
    }
    return;
  }
  // Adam
  const double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2;
  const double bias1 = 1.0 - std::pow(b1, state.step);
  const double bias2 = 1.0 - std::pow(b2, state.step);
  for (std::size_t s = 0; s < grads.d_encodings.size(); ++s) {
    for (std::size_t i = 0; i < state.m_enc[s].size(); ++i) {
      const double g = grads.d_encodings[s][i];
      state.m_enc[s][i] = b1 * state.m_enc[s][i] + (1.0 - b1) * g;
      state.v_enc[s][i] = b2 * state.v_enc[s][i] + (1.0 - b2) * g * g;
      phenotype.encodings[s].entries[i] -=
          cfg.learning_rate * (state.m_enc[s][i] / bias1) /
          (std::sqrt(state.v_enc[s][i] / bias2) + cfg.adam_epsilon);
    }
  }
  if (cfg.train_interaction) {
    const int g_dim = static_cast<int>(grads.d_interaction.rows());
    for (int i = 0; i < g_dim; ++i) {
      for (int j = 0; j < g_dim; ++j) {
        const double g = grads.d_interaction(i, j);
        state.m_int(i, j) = b1 * state.m_int(i, j) + (1.0 - b1) * g;
        state.v_int(i, j) = b2 * state.v_int(i, j) + (1.0 - b2) * g * g;
        phenotype.interaction.entries(i, j) -=
            cfg.learning_rate * (state.m_int(i, j) / bias1) /
            (std::sqrt(state.v_int(i, j) / bias2) + cfg.adam_epsilon);
      }
    }
  }
}

EvalMetrics evaluate_split(const NetworkSpec& net, const Phenotype& phenotype,
                           const Dataset& data, const std::vector<int>& indices,
                           const TrainConfig& cfg, std::uint64_t encode_seed,
                           double noise_relative_l2, std::uint64_t noise_seed) {
  EvalMetrics m;
  m.emitted_spikes.assign(net.layers.size(), 0.0);
  if (indices.empty()) return m;
  int correct = 0;
  double loss_sum = 0.0, temporal_sum = 0.0;
  for (std::size_t lo = 0; lo < indices.size(); lo += cfg.batch_size) {
    const std::size_t hi = std::min(lo + cfg.batch_size, indices.size());
    Tensor samples = gather_samples(data, indices, lo, hi);
    if (noise_relative_l2 > 0.0) {
      samples = add_gaussian_noise(samples, noise_relative_l2, mix_seed(noise_seed, lo));
    }
    const std::vector<int> labels = gather_labels(data, indices, lo, hi);
    const EncodedBatch batch =
        encode_spikes(samples, net.time_steps, cfg.encoding, mix_seed(encode_seed, lo));
    const ForwardResult fwd = forward(net, phenotype, batch, cfg.mode, false);
    loss_sum += cross_entropy_loss(fwd.mean_logits, labels) * static_cast<double>(hi - lo);
    // Temporal difference of the per-step class distributions. Softmax bounds
    // the regularizer; raw logit differences grow with weight scale and let
    // evolution win fitness by exploding outputs instead of improving them.
    std::vector<Tensor> step_probs;
    step_probs.reserve(fwd.step_logits.size());
    for (const Tensor& y : fwd.step_logits) step_probs.push_back(softmax_rows(y));
    for (std::size_t t = 1; t < step_probs.size(); ++t) {
      Tensor diff = step_probs[t];
      diff -= step_probs[t - 1];
      temporal_sum += diff.squared_norm();
    }
    for (std::size_t i = 0; i < labels.size(); ++i) {
      int best = 0;
      for (int c = 1; c < fwd.mean_logits.dim(1); ++c) {
        if (fwd.mean_logits(static_cast<int>(i), c, 0, 0) >
            fwd.mean_logits(static_cast<int>(i), best, 0, 0)) {
          best = c;
        }
      }
      if (best == labels[i]) ++correct;
    }
    for (std::size_t l = 0; l < m.emitted_spikes.size(); ++l) {
      m.emitted_spikes[l] += fwd.emitted_spikes[l];
    }
    m.input_spikes += fwd.input_spikes;
    m.input_binary = batch.binary;
  }
  m.samples = static_cast<int>(indices.size());
  m.loss = loss_sum / m.samples;
  m.accuracy = static_cast<double>(correct) / m.samples;
  m.temporal_reg_per_sample = temporal_sum / m.samples;
  return m;
}

TrainResult train(const NetworkSpec& net, Phenotype& phenotype, const Dataset& data,
                  const TrainConfig& cfg, int first_epoch) {
  validate_train(cfg);
  if (data.train_idx.empty()) throw std::invalid_argument("train: empty training split");
  TrainResult result;
  result.first_epoch = first_epoch;
  OptimizerState opt_state;

  std::vector<int> order = data.train_idx;
  for (int epoch = first_epoch; epoch < cfg.epochs; ++epoch) {
    RandomEngine shuffle_rng(mix_seed(cfg.seed, 0xE90C, epoch));
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[shuffle_rng.below(i)]);
    }
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t lo = 0; lo < order.size(); lo += cfg.batch_size, ++batches) {
      const std::size_t hi = std::min(lo + cfg.batch_size, order.size());
      const Tensor samples = gather_samples(data, order, lo, hi);
      const std::vector<int> labels = gather_labels(data, order, lo, hi);
      const EncodedBatch batch = encode_spikes(samples, net.time_steps, cfg.encoding,
                                               mix_seed(cfg.seed, epoch, lo));
      const ForwardResult fwd = forward(net, phenotype, batch, cfg.mode, true);
      const double batch_loss = cross_entropy_loss(fwd.mean_logits, labels);
      if (!std::isfinite(batch_loss)) {
        throw DivergenceError("train: non-finite loss at epoch " + std::to_string(epoch) +
                              ", batch " + std::to_string(batches));
      }
      loss_sum += batch_loss;
      const GradientBundle grads = backward(net, phenotype, fwd, labels);
      apply_update(phenotype, grads, cfg, opt_state);
    }
    result.loss_history.push_back(batches > 0 ? loss_sum / batches : 0.0);
    const EvalMetrics train_metrics = evaluate_split(net, phenotype, data, data.train_idx, cfg,
                                                     mix_seed(cfg.seed, 0xACC, epoch));
    result.acc_history.push_back(train_metrics.accuracy);
  }
  return result;
}

GradCheckReport grad_check(const NetworkSpec& net, const Phenotype& phenotype,
                           const EncodedBatch& batch, const std::vector<int>& labels, double step,
                           std::size_t max_coords, std::uint64_t seed,
                           bool fault_transpose_interaction) {
  const long long params = phenotype_param_count(phenotype);
  if (params >= 10000) {
    throw std::invalid_argument("grad_check: instance too large (" + std::to_string(params) +
                                " parameters, limit 10^4)");
  }

  // The analytic side: shared backward on the smoothed forward.
  const ForwardResult fwd = forward(net, phenotype, batch, SpikeMode::Smoothed, true);
  const GradientBundle analytic = backward(net, phenotype, fwd, labels,
                                           fault_transpose_interaction);

  std::vector<std::size_t> coords(static_cast<std::size_t>(params));
  std::iota(coords.begin(), coords.end(), 0);
  if (max_coords > 0 && coords.size() > max_coords) {
    const std::size_t keep = std::max<std::size_t>(max_coords, 200);
    RandomEngine rng(mix_seed(seed, 0x60AD));
    for (std::size_t i = coords.size(); i > 1; --i) {
      std::swap(coords[i - 1], coords[rng.below(i)]);
    }
    coords.resize(std::min(keep, coords.size()));
  }

  Phenotype probe = phenotype;
  GradCheckReport report;
  report.coords_checked = coords.size();
  double rel_sum = 0.0;
  for (std::size_t c : coords) {
    const double original = phenotype_coord(probe, c);
    set_phenotype_coord(probe, c, original + step);
    const double loss_plus =
        cross_entropy_loss(forward(net, probe, batch, SpikeMode::Smoothed, false).mean_logits,
                           labels);
    set_phenotype_coord(probe, c, original - step);
    const double loss_minus =
        cross_entropy_loss(forward(net, probe, batch, SpikeMode::Smoothed, false).mean_logits,
                           labels);
    set_phenotype_coord(probe, c, original);

    const double numeric = (loss_plus - loss_minus) / (2.0 * step);
    const double a = bundle_coord(analytic, c);
    const double abs_err = std::fabs(a - numeric);
    const double rel_err = abs_err / std::max(1e-4, std::fabs(a) + std::fabs(numeric));
    rel_sum += rel_err;
    report.max_abs_error = std::max(report.max_abs_error, abs_err);
    if (rel_err > report.max_rel_error) {
      report.max_rel_error = rel_err;
      report.worst_coordinate = describe_coord(probe, c);
      report.worst_analytic = a;
      report.worst_numeric = numeric;
    }
  }
  report.mean_rel_error = coords.empty() ? 0.0 : rel_sum / static_cast<double>(coords.size());
  return report;
}

}  // namespace genesnn
