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
#ifndef SLTNET_GRAPH_HPP
#define SLTNET_GRAPH_HPP

#include <cstdint>
#include <string>
#include <vector>

namespace sltnet {

// Input-domain tag drives the MAC/ACC split: layers fed by real-valued
// tensors count as multiply-accumulate, layers fed by spikes (or integer
// spike products) as accumulate-only.
enum class Domain { untagged, real, spike };

enum class LayerKind {
  conv,            // counted: FL1 or FL2 by domain
  conv_transpose,  // counted
  linear,          // counted (in*out per sample)
  sdmsa,           // counted as ACC: hadamard + channel-sum + broadcast mul
  linear_ca,       // channel-attention linears: itemized, excluded
  gap,             // itemized, excluded
  ca_gate,         // itemized, excluded
  bn,              // itemized, excluded
  maxpool,         // itemized, excluded
  esn,             // itemized, excluded
  add,             // itemized, excluded (residual/fusion additions)
};

const char* layer_kind_name(LayerKind k);
const char* domain_name(Domain d);
bool layer_kind_counted(LayerKind k);

struct LayerRecord {
  std::string name;
  LayerKind kind = LayerKind::conv;
  Domain domain = Domain::untagged;
  int cin = 1, cout = 1;
  int kh = 1, kw = 1;
  int groups = 1;
  int stride = 1;
  // log2 downscale of the layer's input/output relative to the network input
  int level_in = 0, level_out = 0;
  int64_t params = 0;
  // names of the ESNs whose spikes feed this layer (measured-R substitution)
  std::vector<std::string> rate_keys;
};

struct LayerGraph {
  std::vector<LayerRecord> layers;
  int64_t total_params() const {
    int64_t n = 0;
    for (const auto& l : layers) n += l.params;
    return n;
  }
};

// Firing statistics captured during a forward pass, in neuron-build order.
struct ActivationRecord {
  struct NeuronStat {
    std::string name;
    int64_t ones = 0;
    int64_t total = 0;
    bool binary = true;
    double rate() const { return total ? static_cast<double>(ones) / total : 0.0; }
  };
  std::vector<NeuronStat> neurons;

  bool record_shapes = false;
  std::vector<std::pair<std::string, std::vector<int>>> shapes;

  NeuronStat* find(const std::string& name) {
    for (auto& n : neurons)
      if (n.name == name) return &n;
    return nullptr;
  }
};

}  // namespace sltnet

#endif  // SLTNET_GRAPH_HPP
