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
#ifndef SLTNET_EVENTS_HPP
#define SLTNET_EVENTS_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "sltnet/tensor.hpp"

namespace sltnet {

// One DVS event: pixel, microsecond timestamp, polarity in {-1,+1}.
struct Event {
  uint16_t x = 0;
  uint16_t y = 0;
  int64_t t_us = 0;
  int8_t p = 1;
};

struct EventStream {
  uint16_t width = 0;
  uint16_t height = 0;
  std::vector<Event> events;

  bool operator==(const EventStream& o) const {
    if (width != o.width || height != o.height || events.size() != o.events.size()) return false;
    for (size_t i = 0; i < events.size(); ++i) {
      const Event &a = events[i], &b = o.events[i];
      if (a.x != b.x || a.y != b.y || a.t_us != b.t_us || a.p != b.p) return false;
    }
    return true;
  }
};

// K-bin signed polarity histogram; values indexed [k][y][x].
struct VoxelGrid {
  int bins = 0;
  int height = 0;
  int width = 0;
  Tensor<float> values;  // shape (K, H, W)
};

// Per-pixel class ids; 255 marks ignored pixels.
struct LabelMap {
  static constexpr int kIgnore = 255;
  int height = 0;
  int width = 0;
  std::vector<uint8_t> ids;

  uint8_t at(int y, int x) const { return ids[static_cast<size_t>(y) * width + x]; }
  uint8_t& at(int y, int x) { return ids[static_cast<size_t>(y) * width + x]; }
};

// EVS1 container: magic "EVS1", u16 W, u16 H, u64 N, then N records of
// {u16 x, u16 y, i64 t_us, i8 p, u8 pad}, all little-endian.
EventStream read_events(const std::string& path);
void write_events(const EventStream& stream, const std::string& path);

// Eq.-style binning: V[k,y,x] = sum of polarities with floor(t/dt_us)=k.
// Events at or beyond bin K are discarded.
VoxelGrid voxelize(const EventStream& stream, int64_t dt_us, int bins);

// (K,H,W) -> (T,K,H,W); the grid is replicated at every step.
Tensor<float> to_event_tensor(const VoxelGrid& grid, int time_steps);

LabelMap read_label_pgm(const std::string& path);
void write_label_pgm(const LabelMap& label, const std::string& path);

}  // namespace sltnet

#endif  // SLTNET_EVENTS_HPP
