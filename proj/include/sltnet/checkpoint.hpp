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
#ifndef SLTNET_CHECKPOINT_HPP
#define SLTNET_CHECKPOINT_HPP

#include <array>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "sltnet/network.hpp"

namespace sltnet {

// TNS1 tensor container: magic "TNS1", u8 rank, u32 extents, f32 LE values.
void write_tns1(std::ostream& out, const Tensor<float>& t);
Tensor<float> read_tns1(std::istream& in);

// Optimizer moments, epoch index and RNG state carried across runs.
struct TrainState {
  int32_t epoch = 0;
  int64_t adam_step = 0;
  std::array<uint64_t, 4> rng_state{};
  std::vector<Tensor<float>> m, v;  // aligned with trainable store entries

  static TrainState fresh(const Network<float>& net, uint64_t seed);
};

struct CheckpointData {
  uint16_t version = 0;
  uint64_t config_digest = 0;
  std::string config_text;  // resolved key=value config; makes the file self-describing
  int32_t epoch = 0;
  int64_t adam_step = 0;
  std::array<uint64_t, 4> rng_state{};
  std::vector<std::pair<std::string, Tensor<float>>> entries;  // store order
  std::vector<Tensor<float>> m, v;
};

// Write-to-temp + atomic rename; never leaves a partial file behind.
void save_checkpoint(const std::string& path, const Network<float>& net, const TrainState& ts,
                     uint64_t config_digest, const std::string& config_text);

CheckpointData read_checkpoint(const std::string& path);

// Validates entry names/shapes against the freshly built network.
void apply_checkpoint(const CheckpointData& data, Network<float>& net, TrainState& ts);

}  // namespace sltnet

#endif  // SLTNET_CHECKPOINT_HPP
