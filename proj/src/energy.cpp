#include "genesnn/energy.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "genesnn/errors.hpp"

namespace genesnn {

std::vector<long long> layer_flops(const NetworkSpec& net) {
  const std::vector<LayerShape> shapes = layer_output_shapes(net);
  std::vector<long long> flops(net.layers.size());
  LayerShape in{net.input_channels, net.input_height, net.input_width};
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const LayerSpec& spec = net.layers[l];
    if (spec.kind == LayerKind::Conv) {
      flops[l] = shapes[l].flat() * in.channels * spec.kernel * spec.kernel;
    } else {
      flops[l] = in.flat() * shapes[l].flat();
    }
    in = shapes[l];
  }
  return flops;
}

EnergyReport energy_report(const NetworkSpec& net, const std::vector<double>& emitted_spikes,
                           long long input_spikes, bool input_binary, int samples,
                           const EnergyConstants& constants) {
  const std::vector<LayerShape> shapes = layer_output_shapes(net);
  if (emitted_spikes.size() != net.layers.size()) {
    throw StateError("energy_report: spike statistics missing (expected one count per layer)");
  }
  if (samples < 1) throw std::invalid_argument("energy_report: samples must be >= 1");

  EnergyReport rep;
  rep.constants = constants;
  rep.samples = samples;
  rep.time_steps = net.time_steps;
  rep.flops = layer_flops(net);
  rep.flops_first_conv = rep.flops.front();

  const double t = static_cast<double>(net.time_steps);
  const long long num_layers = static_cast<long long>(net.layers.size());
  rep.firing_rates.resize(num_layers);
  rep.input_spikes.resize(num_layers);
  rep.layer_energy_pj.resize(num_layers);

  LayerShape in{net.input_channels, net.input_height, net.input_width};
  for (long long l = 0; l < num_layers; ++l) {
    double entering;
    if (l == 0) {
      // Analog input: every input element is touched each step.
      entering = input_binary ? static_cast<double>(input_spikes)
                              : static_cast<double>(in.flat()) * samples * t;
    } else {
      entering = emitted_spikes[l - 1];
    }
    const double neuron_steps = static_cast<double>(in.flat()) * samples * t;
    const double rate = neuron_steps > 0 ? entering / neuron_steps : 0.0;
    rep.input_spikes[l] = entering;
    rep.firing_rates[l] = rate;
    if (l == 0) {
      rep.layer_energy_pj[l] = constants.e_mac_pj * static_cast<double>(rep.flops[l]);
    } else {
      rep.sops += static_cast<double>(rep.flops[l]) * rate;
      rep.layer_energy_pj[l] = constants.e_ac_pj * t * static_cast<double>(rep.flops[l]) * rate;
    }
    in = shapes[l];
  }
  rep.energy_pj = constants.e_mac_pj * static_cast<double>(rep.flops_first_conv) +
                  constants.e_ac_pj * t * rep.sops;

  double total = input_binary ? static_cast<double>(input_spikes) : 0.0;
  for (double e : emitted_spikes) total += e;
  rep.spike_total = static_cast<long long>(total + 0.5);
  return rep;
}

std::string energy_report_csv(const EnergyReport& report) {
  std::string csv = "layer,flops,spikes,rate,energy_pj\n";
  char row[160];
  for (std::size_t l = 0; l < report.flops.size(); ++l) {
    std::snprintf(row, sizeof(row), "%zu,%lld,%.17g,%.17g,%.17g\n", l, report.flops[l],
                  report.input_spikes[l], report.firing_rates[l], report.layer_energy_pj[l]);
    csv += row;
  }
  std::snprintf(row, sizeof(row), "total,,%lld,,%.17g\n", report.spike_total, report.energy_pj);
  csv += row;
  return csv;
}

}  // namespace genesnn
