#include "genesnn/network.hpp"

#include <Eigen/Core>
#include <cmath>
#include <stdexcept>
#include <string>

#include "genesnn/errors.hpp"
#include "genesnn/rng.hpp"

namespace genesnn {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void check_binary_entries(const Tensor& t) {
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] != 0.0 && t[i] != 1.0) throw std::invalid_argument("SpikeTrain entries must be 0/1");
  }
}

}  // namespace

long long count_spikes(const SpikeTrain& train) {
  if (train.steps.empty()) throw std::invalid_argument("SpikeTrain: T must be >= 1");
  long long total = 0;
  for (const Tensor& t : train.steps) {
    check_binary_entries(t);
    total += static_cast<long long>(t.sum() + 0.5);
  }
  return total;
}

double firing_rate(const SpikeTrain& train) {
  const long long total = count_spikes(train);
  const double neuron_steps =
      static_cast<double>(train.steps.front().size()) * train.time_steps();
  return neuron_steps > 0 ? static_cast<double>(total) / neuron_steps : 0.0;
}

std::vector<LayerShape> layer_output_shapes(const NetworkSpec& net) {
  if (net.layers.empty()) throw std::invalid_argument("NetworkSpec: needs at least one layer");
  if (net.genes < 1) throw std::invalid_argument("NetworkSpec: genes must be >= 1");
  if (net.time_steps < 1) throw std::invalid_argument("NetworkSpec: time_steps must be >= 1");
  if (net.input_channels < 1 || net.input_height < 1 || net.input_width < 1) {
    throw std::invalid_argument("NetworkSpec: input dimensions must be >= 1");
  }
  if (net.layers.back().kind != LayerKind::Dense) {
    throw std::invalid_argument("NetworkSpec: readout (last) layer must be dense");
  }

  int conv_kernel = 0;
  LayerShape cur{net.input_channels, net.input_height, net.input_width};
  std::vector<LayerShape> out;
  out.reserve(net.layers.size());
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const LayerSpec& l = net.layers[i];
    validate_lif(l.lif);
    if (l.out_channels < 1) {
      throw std::invalid_argument("NetworkSpec: layer " + std::to_string(i) +
                                  " out_channels must be >= 1");
    }
    if (l.kind == LayerKind::Conv) {
      if (l.kernel < 1 || l.stride < 1 || l.padding < 0) {
        throw std::invalid_argument("NetworkSpec: layer " + std::to_string(i) +
                                    " has invalid conv geometry");
      }
      if (conv_kernel == 0) conv_kernel = l.kernel;
      if (l.kernel != conv_kernel) {
        throw std::invalid_argument("NetworkSpec: conv kernels must be uniform (layer " +
                                    std::to_string(i) + ")");
      }
      const int ho = (cur.height + 2 * l.padding - l.kernel) / l.stride + 1;
      const int wo = (cur.width + 2 * l.padding - l.kernel) / l.stride + 1;
      if (ho < 1 || wo < 1) {
        throw std::invalid_argument("NetworkSpec: layer " + std::to_string(i) +
                                    " output collapses to zero spatial size");
      }
      cur = {l.out_channels, ho, wo};
    } else {
      // Dense consumes the flattened map.
      cur = {l.out_channels, 1, 1};
    }
    out.push_back(cur);
  }
  return out;
}

void validate_network(const NetworkSpec& net) { (void)layer_output_shapes(net); }

SlotPlan plan_encoding_slots(const NetworkSpec& net) {
  const std::vector<LayerShape> shapes = layer_output_shapes(net);
  SlotPlan plan;
  LayerShape in_shape{net.input_channels, net.input_height, net.input_width};
  int prev_out_slot = -1;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const LayerSpec& l = net.layers[i];
    const int k = l.kind == LayerKind::Conv ? l.kernel : 1;
    const int in_channels =
        l.kind == LayerKind::Conv ? in_shape.channels : static_cast<int>(in_shape.flat());

    int in_slot;
    if (prev_out_slot >= 0 && plan.slots[prev_out_slot].channels == in_channels &&
        plan.slots[prev_out_slot].kernel == k) {
      in_slot = prev_out_slot;
    } else {
      in_slot = static_cast<int>(plan.slots.size());
      plan.slots.push_back({in_channels, k});
    }
    const int out_slot = static_cast<int>(plan.slots.size());
    plan.slots.push_back({l.out_channels, k});
    plan.layer_slots.push_back({in_slot, out_slot});
    prev_out_slot = out_slot;
    in_shape = shapes[i];
  }
  return plan;
}

Phenotype sample_phenotype(const NetworkSpec& net, const Genotype& genotype, std::uint64_t seed) {
  if (genotype.genes() != net.genes) {
    throw ShapeError("sample_phenotype: genotype has g = " + std::to_string(genotype.genes()) +
                     " but network expects g = " + std::to_string(net.genes));
  }
  const SlotPlan plan = plan_encoding_slots(net);
  Phenotype p;
  p.interaction = genotype.interaction;
  p.encodings.reserve(plan.slots.size());
  for (std::size_t s = 0; s < plan.slots.size(); ++s) {
    p.encodings.push_back(sample_encoding(genotype.beta1, genotype.beta2, plan.slots[s].channels,
                                          plan.slots[s].kernel, net.genes, mix_seed(seed, s)));
  }
  return p;
}

long long phenotype_param_count(const Phenotype& p) {
  long long count = static_cast<long long>(p.interaction.genes()) * p.interaction.genes();
  for (const NeuronalEncoding& e : p.encodings) count += static_cast<long long>(e.entries.size());
  return count;
}

Tensor apply_layer(const LayerSpec& spec, const Tensor& weights, const Tensor& x,
                   const LayerShape& in_shape, const LayerShape& out_shape) {
  const int n = x.dim(0);
  if (spec.kind == LayerKind::Dense) {
    const int f_in = static_cast<int>(in_shape.flat());
    const int f_out = out_shape.channels;
    Tensor out(n, f_out, 1, 1);
    Eigen::Map<const RowMat> xm(x.data(), n, f_in);
    Eigen::Map<const RowMat> wm(weights.data(), f_out, f_in);
    Eigen::Map<RowMat>(out.data(), n, f_out) = xm * wm.transpose();
    return out;
  }
  const int k = spec.kernel, s = spec.stride, p = spec.padding;
  Tensor out(n, out_shape.channels, out_shape.height, out_shape.width);
  for (int b = 0; b < n; ++b) {
    for (int co = 0; co < out_shape.channels; ++co) {
      for (int ho = 0; ho < out_shape.height; ++ho) {
        for (int wo = 0; wo < out_shape.width; ++wo) {
          double acc = 0.0;
          for (int ci = 0; ci < in_shape.channels; ++ci) {
            for (int kh = 0; kh < k; ++kh) {
              const int h = ho * s + kh - p;
              if (h < 0 || h >= in_shape.height) continue;
              for (int kw = 0; kw < k; ++kw) {
                const int w = wo * s + kw - p;
                if (w < 0 || w >= in_shape.width) continue;
                acc += weights(co, ci, kh, kw) * x(b, ci, h, w);
              }
            }
          }
          out(b, co, ho, wo) = acc;
        }
      }
    }
  }
  return out;
}

void layer_backward(const LayerSpec& spec, const Tensor& weights, const Tensor& x,
                    const Tensor& d_out, const LayerShape& in_shape, const LayerShape& out_shape,
                    Tensor& d_weights_accum, Tensor& d_x) {
  const int n = x.dim(0);
  if (spec.kind == LayerKind::Dense) {
    const int f_in = static_cast<int>(in_shape.flat());
    const int f_out = out_shape.channels;
    Eigen::Map<const RowMat> xm(x.data(), n, f_in);
    Eigen::Map<const RowMat> dom(d_out.data(), n, f_out);
    Eigen::Map<const RowMat> wm(weights.data(), f_out, f_in);
    Eigen::Map<RowMat>(d_weights_accum.data(), f_out, f_in) += dom.transpose() * xm;
    Eigen::Map<RowMat>(d_x.data(), n, f_in) = dom * wm;
    return;
  }
  const int k = spec.kernel, s = spec.stride, p = spec.padding;
  d_x.fill(0.0);
  for (int b = 0; b < n; ++b) {
    for (int co = 0; co < out_shape.channels; ++co) {
      for (int ho = 0; ho < out_shape.height; ++ho) {
        for (int wo = 0; wo < out_shape.width; ++wo) {
          const double g = d_out(b, co, ho, wo);
          if (g == 0.0) continue;
          for (int ci = 0; ci < in_shape.channels; ++ci) {
            for (int kh = 0; kh < k; ++kh) {
              const int h = ho * s + kh - p;
              if (h < 0 || h >= in_shape.height) continue;
              for (int kw = 0; kw < k; ++kw) {
                const int w = wo * s + kw - p;
                if (w < 0 || w >= in_shape.width) continue;
                d_weights_accum(co, ci, kh, kw) += g * x(b, ci, h, w);
                d_x(b, ci, h, w) += g * weights(co, ci, kh, kw);
              }
            }
          }
        }
      }
    }
  }
}

ForwardResult forward(const NetworkSpec& net, const Phenotype& phenotype,
                      const EncodedBatch& input, SpikeMode mode, bool keep_cache) {
  const std::vector<LayerShape> shapes = layer_output_shapes(net);
  const SlotPlan plan = plan_encoding_slots(net);
  const int num_layers = static_cast<int>(net.layers.size());
  const int hidden = num_layers - 1;
  const int t_steps = net.time_steps;

  if (phenotype.encodings.size() != plan.slots.size()) {
    throw ShapeError("forward: phenotype has " + std::to_string(phenotype.encodings.size()) +
                     " encodings, network needs " + std::to_string(plan.slots.size()));
  }
  if (input.time_steps() != t_steps) {
    throw ShapeError("forward: input has T = " + std::to_string(input.time_steps()) +
                     ", network expects T = " + std::to_string(t_steps));
  }
  for (const Tensor& step : input.steps) {
    if (step.dim(1) != net.input_channels || step.dim(2) != net.input_height ||
        step.dim(3) != net.input_width) {
      throw ShapeError("forward: input tensor shape does not match network input");
    }
  }
  const int batch = input.steps.front().dim(0);

  ForwardResult result;
  result.emitted_spikes.assign(num_layers, 0.0);
  if (input.binary) {
    for (const Tensor& step : input.steps) {
      result.input_spikes += static_cast<long long>(step.sum() + 0.5);
    }
  }

  ForwardCache& cache = result.cache;
  cache.mode = mode;
  cache.weights.reserve(num_layers);
  for (int l = 0; l < num_layers; ++l) {
    cache.weights.push_back(materialize_weights(phenotype.encodings[plan.layer_slots[l][0]],
                                                phenotype.interaction,
                                                phenotype.encodings[plan.layer_slots[l][1]]));
  }
  if (keep_cache) {
    cache.input_steps = input.steps;
    cache.u_pre.resize(hidden);
    cache.spikes.resize(hidden);
  }

  // Hidden membranes start at the reset potential, the readout at zero.
  std::vector<Tensor> membrane(num_layers);
  for (int l = 0; l < hidden; ++l) {
    membrane[l] = Tensor(batch, shapes[l].channels, shapes[l].height, shapes[l].width,
                         net.layers[l].lif.v_reset);
  }
  membrane[num_layers - 1] = Tensor(batch, shapes.back().channels, 1, 1, 0.0);

  LayerShape in_shape{net.input_channels, net.input_height, net.input_width};
  result.step_logits.reserve(t_steps);
  for (int t = 0; t < t_steps; ++t) {
    const Tensor* x = &input.steps[t];
    Tensor buffer;
    LayerShape cur_in = in_shape;
    for (int l = 0; l < num_layers; ++l) {
      Tensor current = apply_layer(net.layers[l], cache.weights[l], *x, cur_in, shapes[l]);
      if (!current.all_finite()) {
        throw NumericalError("forward: non-finite activation at layer " + std::to_string(l) +
                             ", step " + std::to_string(t));
      }
      if (l < hidden) {
        const LifConfig& lif = net.layers[l].lif;
        Tensor u_pre = Tensor::zeros_like(current);
        Tensor spikes = Tensor::zeros_like(current);
        Tensor& u = membrane[l];
        double emitted = 0.0;
        for (std::size_t i = 0; i < current.size(); ++i) {
          const double up = lif.tau * u[i] + current[i];
          const double s = spike_value(up, lif, mode);
          u_pre[i] = up;
          spikes[i] = s;
          u[i] = up * (1.0 - s) + lif.v_reset * s;
          emitted += s;
        }
        result.emitted_spikes[l] += emitted;
        if (keep_cache) {
          cache.u_pre[l].push_back(std::move(u_pre));
          cache.spikes[l].push_back(spikes);
        }
        buffer = std::move(spikes);
        x = &buffer;
      } else {
        // Non-spiking integrator readout: accumulate and expose each step.
        membrane[l] += current;
        result.step_logits.push_back(membrane[l]);
      }
      cur_in = shapes[l];
    }
  }

  result.mean_logits = Tensor::zeros_like(result.step_logits.front());
  for (const Tensor& y : result.step_logits) result.mean_logits += y;
  result.mean_logits *= 1.0 / static_cast<double>(t_steps);
  if (!keep_cache) cache = ForwardCache{};
  return result;
}

}  // namespace genesnn
