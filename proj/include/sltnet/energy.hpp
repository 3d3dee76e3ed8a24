/*
 * Copyright 2026 SLTNet Contributors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#ifndef SLTNET_ENERGY_HPP
#define SLTNET_ENERGY_HPP

#include <map>
#include <string>
#include <vector>

#include "sltnet/graph.hpp"

namespace sltnet {

struct LayerOps {
  std::string name;
  LayerKind kind = LayerKind::conv;
  Domain domain = Domain::untagged;
  int64_t ops = 0;     // mult-add (or add) count for one input sample
  bool counted = false;  // contributes to FL1/FL2
  std::vector<std::string> rate_keys;
};

// Walks the graph at a given input size. Convs count
// C_out*H_out*W_out*(C_in/groups)*kh*kw, transposed convs count from their
// input extent, linears count in*out. BN/pool/elementwise/CA entries are
// itemized with counted=false. Counted layers must carry a domain tag.
std::vector<LayerOps> count_ops(const LayerGraph& graph, int input_h, int input_w);

struct EnergyReport {
  struct Item {
    std::string name;
    std::string kind;
    std::string domain;
    int64_t ops = 0;
    bool counted = false;
    double rate = 0.0;  // R used for this layer (measured mode)
  };
  std::vector<Item> items;
  int64_t fl1 = 0;  // MAC mult-adds (real-input layers)
  int64_t fl2 = 0;  // ACC mult-adds (spike-input layers)
  int time_steps = 1;
  std::string r_mode = "fixed";  // fixed | measured
  double r_value = 0.5;
  double e_mac_pj = 4.6;
  double e_acc_pj = 0.9;
  double energy_mj = 0.0;
  int64_t params = 0;
  std::string config_digest;
};

// E = E_MAC*FL1 + E_ACC*FL2*T*R, reported in millijoules.
EnergyReport estimate_energy(const std::vector<LayerOps>& counts, int time_steps, double r,
                             double e_mac_pj = 4.6, double e_acc_pj = 0.9);

// Same split, but each ACC layer uses the firing rate of the ESN feeding it.
EnergyReport estimate_energy_measured(const std::vector<LayerOps>& counts, int time_steps,
                                      const std::map<std::string, double>& rates,
                                      double e_mac_pj = 4.6, double e_acc_pj = 0.9);

// Per-ESN firing rates out of a forward pass record.
std::map<std::string, double> measure_rates(const ActivationRecord& rec);

std::string energy_report_json(const EnergyReport& rep);

}  // namespace sltnet

#endif  // SLTNET_ENERGY_HPP
