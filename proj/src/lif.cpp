#include "genesnn/lif.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "genesnn/errors.hpp"

namespace genesnn {

void validate_lif(const LifConfig& cfg) {
  if (!(cfg.tau > 0.0) || cfg.tau > 1.0) {
    throw std::invalid_argument("LifConfig: tau must be in (0, 1], got " + std::to_string(cfg.tau));
  }
  if (!(cfg.v_threshold > 0.0)) throw std::invalid_argument("LifConfig: v_threshold must be > 0");
  if (!(cfg.surrogate_width > 0.0)) {
    throw std::invalid_argument("LifConfig: surrogate_width must be > 0");
  }
  if (!std::isfinite(cfg.v_reset)) throw std::invalid_argument("LifConfig: v_reset must be finite");
}

std::pair<Tensor, LifState> lif_step(const LifState& state, const Tensor& input_current,
                                     const LifConfig& cfg) {
  if (!state.membrane.same_shape(input_current)) {
    throw ShapeError("lif_step: membrane and input shapes disagree");
  }
  Tensor spikes = Tensor::zeros_like(input_current);
  LifState next{Tensor::zeros_like(input_current)};
  for (std::size_t i = 0; i < input_current.size(); ++i) {
    const double u_pre = cfg.tau * state.membrane[i] + input_current[i];
    const bool fired = u_pre >= cfg.v_threshold;
    spikes[i] = fired ? 1.0 : 0.0;
    next.membrane[i] = fired ? cfg.v_reset : u_pre;
  }
  return {std::move(spikes), std::move(next)};
}

double surrogate_grad(double u_pre, const LifConfig& cfg) {
  const double w = cfg.surrogate_width;
  return std::fabs(u_pre - cfg.v_threshold) < w ? 1.0 / (2.0 * w) : 0.0;
}

Tensor surrogate_grad(const Tensor& u_pre, const LifConfig& cfg) {
  Tensor out = Tensor::zeros_like(u_pre);
  for (std::size_t i = 0; i < u_pre.size(); ++i) out[i] = surrogate_grad(u_pre[i], cfg);
  return out;
}

double spike_value(double u_pre, const LifConfig& cfg, SpikeMode mode) {
  if (mode == SpikeMode::Binary) return u_pre >= cfg.v_threshold ? 1.0 : 0.0;
  // Integral of the rectangular surrogate: ramp from 0 to 1 across the window.
  const double w = cfg.surrogate_width;
  return std::clamp((u_pre - cfg.v_threshold) / (2.0 * w) + 0.5, 0.0, 1.0);
}

}  // namespace genesnn
