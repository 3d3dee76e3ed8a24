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
#ifndef SLTNET_CONFIG_HPP
#define SLTNET_CONFIG_HPP

#include <array>
#include <cstdint>
#include <string>

#include "sltnet/loss.hpp"
#include "sltnet/network.hpp"
#include "sltnet/optim.hpp"

namespace sltnet {

// Flat key=value run configuration ('#' starts a comment). Unknown keys are
// rejected; the canonical text and its FNV-1a digest stamp every artifact.
struct RunConfig {
  uint64_t seed = 0;

  // data / representation
  int classes = 6;
  int bins = 5;
  int64_t dt_us = 50000;
  int time_steps = 1;
  double val_fraction = 0.2;
  bool hflip = false;

  // network
  int base_channels = 24;
  int ca_reduction = 4;
  int stb_heads = 4;
  int stb_mlp_ratio = 4;
  std::array<int, 3> dilations_stage1{1, 2, 5};
  std::array<int, 3> dilations_stage2{1, 2, 5};
  std::array<int, 3> dilations_stage3{2, 5, 9};
  std::array<int, 3> dilations_decoder{1, 1, 1};
  std::string shortcut = "ms";
  bool enable_fe = true;
  bool enable_stb = true;
  bool enable_skip_fusion = true;

  // neuron / surrogate schedule
  double tau = 0.25;
  double u_th = 1.0;
  double u_reset = 0.0;
  double k_min = 1.0;
  double k_max = 10.0;

  // optimizer / schedule
  int epochs = 300;
  int batch = 64;
  int step_size = 5;
  double lr = 1e-3;
  double weight_decay = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double gamma = 0.92;

  // loss
  double lambda1 = 1.0;
  double lambda2 = 0.4;
  double ohem_k = 0.7;
  int ignore_id = 255;

  // run control
  double stop_at_miou = 0.0;  // 0 disables early stop
  int val_every = 1;
  int threads = 0;  // 0: SLTNET_THREADS env or hardware count

  static RunConfig from_file(const std::string& path);
  static RunConfig from_text(const std::string& text);

  // key=value assignment; ablation aliases (k, stb, fe, fusion) resolve here
  void set(const std::string& key, const std::string& value);

  std::string canonical_text() const;
  uint64_t digest() const;
  std::string digest_hex() const;
  void validate() const;

  NetworkConfig network() const;
  OptimConfig optim() const;
  LossConfig loss() const;
};

uint64_t fnv1a64(const std::string& s);

}  // namespace sltnet

#endif  // SLTNET_CONFIG_HPP
