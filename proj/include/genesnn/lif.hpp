#pragma once

#include "genesnn/tensor.hpp"

namespace genesnn {

/// Discrete hard-reset LIF: u <- tau*u + I, spike where u >= v_threshold,
/// spiked entries reset to v_reset.
struct LifConfig {
  double tau = 0.5;              // leak factor per step, (0, 1]
  double v_threshold = 1.0;      // > 0
  double v_reset = 0.0;
  double surrogate_width = 0.5;  // half-width of the rectangular pseudo-derivative
};

void validate_lif(const LifConfig& cfg);

struct LifState {
  Tensor membrane;
};

// How the threshold nonlinearity is evaluated in forward passes.
//  Binary   - Heaviside spikes, the real SNN. Its loss is piecewise constant
//             along spike decisions, so surrogate gradients are approximate.
//  Smoothed - spike replaced by the integral of the rectangular surrogate
//             (a clamped ramp over [v_th - w, v_th + w]); the shared backward
//             is then the exact derivative, which is what finite-difference
//             checks validate.
enum class SpikeMode { Binary, Smoothed };

/// One LIF step over a whole tensor: returns (spikes, new state).
std::pair<Tensor, LifState> lif_step(const LifState& state, const Tensor& input_current,
                                     const LifConfig& cfg);

/// Rectangular surrogate: 1/(2w) inside |u - v_th| < w, else 0. Integrates to 1.
double surrogate_grad(double u_pre, const LifConfig& cfg);
Tensor surrogate_grad(const Tensor& u_pre, const LifConfig& cfg);

/// Spike value of a membrane potential under the given mode.
double spike_value(double u_pre, const LifConfig& cfg, SpikeMode mode);

}  // namespace genesnn
