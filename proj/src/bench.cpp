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
#include "sltnet/bench.hpp"

#include <algorithm>
#include <chrono>

#include <json.hpp>

namespace sltnet {

FpsReport benchmark_fps(Network<float>& net, int h, int w, int warmup, int iters,
                        const std::string& config_digest) {
  require_arg(iters >= 1 && warmup >= 0, "bench: need iters >= 1 and warmup >= 0");
  if (!net.folded_available) net.fold_repconvs();

  Rng rng(123);
  auto input = std::make_shared<Tensor<float>>(std::vector<int>{1, net.cfg.input_bins, h, w});
  for (auto& v : input->v) v = static_cast<float>(rng.uniform(-2.0, 2.0));
  std::vector<std::shared_ptr<Tensor<float>>> steps(
      static_cast<size_t>(net.cfg.time_steps), input);

  ForwardOptions<float> opt;
  opt.folded = true;

  std::vector<double> samples;
  samples.reserve(static_cast<size_t>(iters));
  for (int i = 0; i < warmup + iters; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Tape<float> tape;
    net.forward(tape, steps, opt);
    const auto t1 = std::chrono::steady_clock::now();
    if (i >= warmup)
      samples.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  std::sort(samples.begin(), samples.end());
  const double median = samples.size() % 2
                            ? samples[samples.size() / 2]
                            : 0.5 * (samples[samples.size() / 2 - 1] + samples[samples.size() / 2]);

  FpsReport rep;
  rep.input_h = h;
  rep.input_w = w;
  rep.warmup = warmup;
  rep.iters = iters;
  rep.median_latency_ms = median;
  rep.fps = median > 0 ? 1000.0 / median : 0.0;
  rep.config_digest = config_digest;
  return rep;
}

std::string fps_report_json(const FpsReport& rep) {
  nlohmann::json j;
  j["input"] = {rep.input_h, rep.input_w};
  j["warmup"] = rep.warmup;
  j["iters"] = rep.iters;
  j["median_latency_ms"] = rep.median_latency_ms;
  j["fps"] = rep.fps;
  j["config_digest"] = rep.config_digest;
  return j.dump(2);
}

}  // namespace sltnet
