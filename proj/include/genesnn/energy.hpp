#pragma once

#include <string>
#include <vector>

#include "genesnn/network.hpp"

namespace genesnn {

struct EnergyConstants {
  double e_mac_pj = 4.6;  // pJ per multiply-accumulate
  double e_ac_pj = 0.9;   // pJ per accumulate
};

/// Static MAC count of each layer for one dense pass of one sample
/// (output elements times MACs per element).
std::vector<long long> layer_flops(const NetworkSpec& net);

// Billing convention: the first layer consumes analog input and is charged
// E_MAC * FL once; every later layer is charged E_AC * T * FL * fr, where fr
// is the firing rate of the spike train ENTERING it, so the AC count equals
// the number of spike-triggered accumulates exactly.
struct EnergyReport {
  long long flops_first_conv = 0;       // FL of the MAC-billed first layer
  double sops = 0.0;                    // sum over later layers of FL * fr_in
  std::vector<long long> flops;         // per layer
  std::vector<double> firing_rates;     // per layer, rate of its input train
  std::vector<double> input_spikes;     // per layer, spikes entering it (batch total)
  std::vector<double> layer_energy_pj;  // per layer billing
  double energy_pj = 0.0;               // per-sample total
  long long spike_total = 0;            // all spikes counted during the run
  int time_steps = 0;
  int samples = 0;
  EnergyConstants constants;
};

/// Builds the report from a forward pass's spike statistics. emitted_spikes
/// holds per-layer emitted spike totals over the whole evaluated batch;
/// input_spikes the input-train total when the input is binary.
EnergyReport energy_report(const NetworkSpec& net, const std::vector<double>& emitted_spikes,
                           long long input_spikes, bool input_binary, int samples,
                           const EnergyConstants& constants = {});

/// CSV with header layer,flops,spikes,rate,energy_pj and a final total row.
std::string energy_report_csv(const EnergyReport& report);

}  // namespace genesnn
