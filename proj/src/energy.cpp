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
#include "sltnet/energy.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "sltnet/common.hpp"

namespace sltnet {

const char* layer_kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::conv: return "conv";
    case LayerKind::conv_transpose: return "conv_transpose";
    case LayerKind::linear: return "linear";
    case LayerKind::sdmsa: return "sdmsa";
    case LayerKind::linear_ca: return "linear_ca";
    case LayerKind::gap: return "gap";
    case LayerKind::ca_gate: return "ca_gate";
    case LayerKind::bn: return "bn";
    case LayerKind::maxpool: return "maxpool";
    case LayerKind::esn: return "esn";
    case LayerKind::add: return "add";
  }
  return "?";
}

const char* domain_name(Domain d) {
  switch (d) {
    case Domain::real: return "real";
    case Domain::spike: return "spike";
    default: return "untagged";
  }
}

bool layer_kind_counted(LayerKind k) {
  return k == LayerKind::conv || k == LayerKind::conv_transpose || k == LayerKind::linear ||
         k == LayerKind::sdmsa;
}

namespace {

// stride-2 3x3 pad-1 halving; equals H/2 for even extents
int halve(int x) { return (x - 1) / 2 + 1; }

}  // namespace

std::vector<LayerOps> count_ops(const LayerGraph& graph, int input_h, int input_w) {
  require_arg(input_h > 0 && input_w > 0, "count_ops: input extents must be positive");
  int max_level = 0;
  for (const auto& l : graph.layers) max_level = std::max({max_level, l.level_in, l.level_out});
  std::vector<int> hs{input_h}, ws{input_w};
  for (int l = 1; l <= max_level; ++l) {
    hs.push_back(halve(hs.back()));
    ws.push_back(halve(ws.back()));
  }

  std::vector<LayerOps> out;
  out.reserve(graph.layers.size());
  for (const auto& l : graph.layers) {
    LayerOps o;
    o.name = l.name;
    o.kind = l.kind;
    o.domain = l.domain;
    o.counted = layer_kind_counted(l.kind);
    o.rate_keys = l.rate_keys;
    if (o.counted && l.domain == Domain::untagged)
      throw ValidationError("count_ops: counted layer '" + l.name + "' is untagged");
    const int64_t hin = hs[static_cast<size_t>(l.level_in)];
    const int64_t win = ws[static_cast<size_t>(l.level_in)];
    const int64_t hout = hs[static_cast<size_t>(l.level_out)];
    const int64_t wout = ws[static_cast<size_t>(l.level_out)];
    switch (l.kind) {
      case LayerKind::conv:
        o.ops = static_cast<int64_t>(l.cout) * hout * wout * (l.cin / l.groups) * l.kh * l.kw;
        break;
      case LayerKind::conv_transpose:
        o.ops = static_cast<int64_t>(l.cin) * hin * win * l.cout * l.kh * l.kw;
        break;
      case LayerKind::linear:
      case LayerKind::linear_ca:
        o.ops = static_cast<int64_t>(l.cin) * l.cout;
        break;
      case LayerKind::sdmsa:
        // Q⊙K, channel sum, broadcast ⊙V: three passes over C*H*W
        o.ops = 3LL * l.cin * hin * win;
        break;
      default:
        o.ops = static_cast<int64_t>(l.cin) * hin * win;  // one pass, itemized only
        break;
    }
    out.push_back(std::move(o));
  }
  return out;
}

namespace {

void fill_common(EnergyReport& rep, const std::vector<LayerOps>& counts) {
  for (const auto& c : counts) {
    require_valid(c.ops >= 0, "energy: negative op count for layer " + c.name);
    EnergyReport::Item it;
    it.name = c.name;
    it.kind = layer_kind_name(c.kind);
    it.domain = domain_name(c.domain);
    it.ops = c.ops;
    it.counted = c.counted;
    rep.items.push_back(std::move(it));
    if (!c.counted) continue;
    if (c.domain == Domain::real)
      rep.fl1 += c.ops;
    else
      rep.fl2 += c.ops;
  }
}

}  // namespace

EnergyReport estimate_energy(const std::vector<LayerOps>& counts, int time_steps, double r,
                             double e_mac_pj, double e_acc_pj) {
  require_arg(time_steps >= 1, "energy: time steps must be >= 1");
  require_arg(r >= 0.0 && r <= 1.0, "energy: firing rate must lie in [0, 1]");
  EnergyReport rep;
  rep.time_steps = time_steps;
  rep.r_mode = "fixed";
  rep.r_value = r;
  rep.e_mac_pj = e_mac_pj;
  rep.e_acc_pj = e_acc_pj;
  fill_common(rep, counts);
  for (auto& it : rep.items)
    if (it.counted && it.domain == std::string("spike")) it.rate = r;
  rep.energy_mj = (e_mac_pj * static_cast<double>(rep.fl1) +
                   e_acc_pj * static_cast<double>(rep.fl2) * time_steps * r) *
                  1e-9;
  return rep;
}

EnergyReport estimate_energy_measured(const std::vector<LayerOps>& counts, int time_steps,
                                      const std::map<std::string, double>& rates,
                                      double e_mac_pj, double e_acc_pj) {
  require_arg(time_steps >= 1, "energy: time steps must be >= 1");
  EnergyReport rep;
  rep.time_steps = time_steps;
  rep.r_mode = "measured";
  rep.r_value = 0.0;
  rep.e_mac_pj = e_mac_pj;
  rep.e_acc_pj = e_acc_pj;
  fill_common(rep, counts);
  double acc_energy_pj = 0.0;
  for (size_t i = 0; i < counts.size(); ++i) {
    const LayerOps& c = counts[i];
    if (!c.counted || c.domain != Domain::spike) continue;
    double r = 0.0;
    int found = 0;
    for (const auto& key : c.rate_keys) {
      auto it = rates.find(key);
      if (it != rates.end()) {
        r += it->second;
        ++found;
      }
    }
    require_valid(found > 0 || c.rate_keys.empty(),
                  "energy: no measured rate for layer " + c.name);
    if (found) r /= found;
    rep.items[i].rate = r;
    acc_energy_pj += e_acc_pj * static_cast<double>(c.ops) * time_steps * r;
  }
  rep.energy_mj = (e_mac_pj * static_cast<double>(rep.fl1) + acc_energy_pj) * 1e-9;
  return rep;
}

std::map<std::string, double> measure_rates(const ActivationRecord& rec) {
  require_valid(!rec.neurons.empty(), "measure_rates: empty activation record");
  bool any = false;
  for (const auto& n : rec.neurons) any |= n.total > 0;
  require_valid(any, "measure_rates: record holds no spikes (no forward pass ran)");
  std::map<std::string, double> rates;
  for (const auto& n : rec.neurons) rates[n.name] = n.rate();
  return rates;
}

std::string energy_report_json(const EnergyReport& rep) {
  nlohmann::json j;
  j["fl1_mac"] = rep.fl1;
  j["fl2_acc"] = rep.fl2;
  j["time_steps"] = rep.time_steps;
  j["r_mode"] = rep.r_mode;
  if (rep.r_mode == "fixed") j["r"] = rep.r_value;
  j["e_mac_pj"] = rep.e_mac_pj;
  j["e_acc_pj"] = rep.e_acc_pj;
  j["energy_mj"] = rep.energy_mj;
  j["params"] = rep.params;
  if (!rep.config_digest.empty()) j["config_digest"] = rep.config_digest;
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& it : rep.items) {
    nlohmann::json l;
    l["name"] = it.name;
    l["kind"] = it.kind;
    l["domain"] = it.domain;
    l["ops"] = it.ops;
    l["counted"] = it.counted;
    if (it.counted && it.domain == "spike") l["r"] = it.rate;
    layers.push_back(std::move(l));
  }
  j["layers"] = std::move(layers);
  return j.dump(2);
}

}  // namespace sltnet
