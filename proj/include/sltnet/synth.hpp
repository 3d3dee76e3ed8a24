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
#ifndef SLTNET_SYNTH_HPP
#define SLTNET_SYNTH_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "sltnet/events.hpp"

namespace sltnet {

// Moving-shape generator: one shape per foreground class drifts across the
// frame for 250 ms simulated at 1 ms micro-steps; pixels emit events where the
// rendered intensity changes, the label rasterizes interiors at the final step.
struct ShapeSpec {
  int kind = 0;  // 0 rectangle, 1 disk, 2 triangle
  uint8_t cls = 1;
  double cx0 = 0, cy0 = 0;    // center at t=0 (pixels)
  double vx = 0, vy = 0;      // pixels per millisecond
  double half_w = 0, half_h = 0;
};

struct SynthSample {
  EventStream stream;
  LabelMap label;
  std::vector<ShapeSpec> shapes;
};

constexpr int kSynthWindowMs = 250;
constexpr int kSynthStepUs = 1000;

// Deterministic in all arguments. classes >= 2 (background + shapes);
// class c > 0 uses shape kind (c-1) mod 3.
std::vector<SynthSample> synth_dataset(uint64_t seed, int n_samples, int classes, int height,
                                       int width);

// Writes sample_%05d.evs1 / sample_%05d.pgm plus meta.json into dir.
void write_synth_dataset(const std::string& dir, uint64_t seed, int n_samples, int classes,
                         int height, int width);

// Renders shape interiors at micro-step t_ms (painter order by class id).
// 0 = background; used by the generator and exposed for verification.
void rasterize_shapes_at(const std::vector<ShapeSpec>& shapes, int t_ms, int height, int width,
                         std::vector<uint8_t>& out_cls);

}  // namespace sltnet

#endif  // SLTNET_SYNTH_HPP
