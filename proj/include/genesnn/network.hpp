#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "genesnn/genome.hpp"
#include "genesnn/lif.hpp"
#include "genesnn/tensor.hpp"

namespace genesnn {

/// T binary tensors; entries are 0/1.
struct SpikeTrain {
  std::vector<Tensor> steps;

  int time_steps() const { return static_cast<int>(steps.size()); }
};

long long count_spikes(const SpikeTrain& train);
double firing_rate(const SpikeTrain& train);

enum class LayerKind { Conv, Dense };

struct LayerSpec {
  LayerKind kind = LayerKind::Dense;
  int out_channels = 1;  // output features for Dense
  int kernel = 1;        // Conv only; Dense is k = 1
  int stride = 1;
  int padding = 0;
  LifConfig lif;
};

/// Feedforward stack of conv/dense layers, each followed by LIF neurons
/// except the last, which is a non-spiking integrator readout.
struct NetworkSpec {
  int input_channels = 1;
  int input_height = 1;
  int input_width = 1;
  int genes = 1;
  int time_steps = 4;
  std::vector<LayerSpec> layers;
};

struct LayerShape {
  int channels = 0, height = 0, width = 0;
  long long flat() const { return static_cast<long long>(channels) * height * width; }
};

/// Output shape of every layer, after validating that shapes compose, conv
/// kernels are uniform, and the readout layer is dense.
std::vector<LayerShape> layer_output_shapes(const NetworkSpec& net);

void validate_network(const NetworkSpec& net);

// Adjacent layers share an encoding tensor when their interface matches
// (same channel count and kernel size). A conv->dense boundary flattens the
// feature map, so the dense layer gets its own input slot.
struct SlotPlan {
  struct Slot {
    int channels = 0;
    int kernel = 1;
  };
  std::vector<Slot> slots;
  std::vector<std::array<int, 2>> layer_slots;  // {input slot, output slot} per layer
};

SlotPlan plan_encoding_slots(const NetworkSpec& net);

/// Concrete network parameters: one encoding per slot plus the shared
/// interaction matrix. This is what gradient descent trains.
struct Phenotype {
  std::vector<NeuronalEncoding> encodings;
  GeneInteraction interaction;
};

/// Samples every encoding slot from the genotype's wiring distribution
/// (per-slot seeds derived from `seed`) and copies its interaction matrix.
Phenotype sample_phenotype(const NetworkSpec& net, const Genotype& genotype, std::uint64_t seed);

/// Stored reals: all encoding entries plus g^2.
long long phenotype_param_count(const Phenotype& p);

/// Network input over T steps. Constant current coding repeats the same real
/// tensor; Poisson coding yields binary tensors (binary = true).
struct EncodedBatch {
  std::vector<Tensor> steps;
  bool binary = false;

  int time_steps() const { return static_cast<int>(steps.size()); }
};

struct ForwardCache {
  std::vector<Tensor> weights;              // materialized W per layer
  std::vector<Tensor> input_steps;          // network input per step
  std::vector<std::vector<Tensor>> u_pre;   // [hidden layer][t]
  std::vector<std::vector<Tensor>> spikes;  // [hidden layer][t]
  SpikeMode mode = SpikeMode::Binary;
};

struct ForwardResult {
  std::vector<Tensor> step_logits;  // Y^(t), readout membrane at each step (N, classes, 1, 1)
  Tensor mean_logits;               // time average of Y^(t)
  std::vector<double> emitted_spikes;  // per layer; readout emits none
  long long input_spikes = 0;          // 0 unless the input is binary
  ForwardCache cache;                  // populated when keep_cache
};

/// Runs the network for T steps. Membranes start at v_reset (readout at 0);
/// weights are materialized once per call. Throws NumericalError naming the
/// layer and step if an activation goes non-finite.
ForwardResult forward(const NetworkSpec& net, const Phenotype& phenotype,
                      const EncodedBatch& input, SpikeMode mode = SpikeMode::Binary,
                      bool keep_cache = false);

/// One layer's linear map (conv, or dense over the flattened input).
Tensor apply_layer(const LayerSpec& spec, const Tensor& weights, const Tensor& x,
                   const LayerShape& in_shape, const LayerShape& out_shape);

/// Reverse of apply_layer: accumulates into d_weights_accum, overwrites d_x.
void layer_backward(const LayerSpec& spec, const Tensor& weights, const Tensor& x,
                    const Tensor& d_out, const LayerShape& in_shape, const LayerShape& out_shape,
                    Tensor& d_weights_accum, Tensor& d_x);

}  // namespace genesnn
