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
#ifndef SLTNET_BENCH_HPP
#define SLTNET_BENCH_HPP

#include <string>

#include "sltnet/network.hpp"

namespace sltnet {

struct FpsReport {
  int input_h = 0, input_w = 0;
  int warmup = 0, iters = 0;
  double median_latency_ms = 0.0;
  double fps = 0.0;
  std::string config_digest;
};

// Median wall-clock latency of eval-mode forward passes (folded RepConvs) on
// a seeded random input. No pass/fail threshold: numbers are hardware-bound.
FpsReport benchmark_fps(Network<float>& net, int h, int w, int warmup, int iters,
                        const std::string& config_digest);

std::string fps_report_json(const FpsReport& rep);

}  // namespace sltnet

#endif  // SLTNET_BENCH_HPP
