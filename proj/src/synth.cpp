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
#include "sltnet/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "sltnet/common.hpp"
#include "sltnet/rng.hpp"

namespace sltnet {

namespace {

bool inside_shape(const ShapeSpec& s, int cx, int cy, int px, int py) {
  const double dx = px - cx;
  const double dy = py - cy;
  switch (s.kind) {
    case 0:  // axis-aligned rectangle
      return std::abs(dx) <= s.half_w && std::abs(dy) <= s.half_h;
    case 1:  // disk
      return dx * dx + dy * dy <= s.half_w * s.half_w;
    default: {  // isoceles triangle pointing up
      const double r = s.half_w;
      const double ax = 0, ay = -r;
      const double bx = -0.95 * r, by = 0.85 * r;
      const double cx2 = 0.95 * r, cy2 = 0.85 * r;
      auto side = [dx, dy](double x1, double y1, double x2, double y2) {
        return (x2 - x1) * (dy - y1) - (y2 - y1) * (dx - x1);
      };
      const double d1 = side(ax, ay, bx, by);
      const double d2 = side(bx, by, cx2, cy2);
      const double d3 = side(cx2, cy2, ax, ay);
      const bool neg = d1 < 0 || d2 < 0 || d3 < 0;
      const bool pos = d1 > 0 || d2 > 0 || d3 > 0;
      return !(neg && pos);
    }
  }
}

int center_x_at(const ShapeSpec& s, int t_ms) {
  return static_cast<int>(std::lround(s.cx0 + s.vx * t_ms));
}
int center_y_at(const ShapeSpec& s, int t_ms) {
  return static_cast<int>(std::lround(s.cy0 + s.vy * t_ms));
}

}  // namespace

void rasterize_shapes_at(const std::vector<ShapeSpec>& shapes, int t_ms, int height, int width,
                         std::vector<uint8_t>& out_cls) {
  out_cls.assign(static_cast<size_t>(height) * width, 0);
  for (const ShapeSpec& s : shapes) {  // ascending class id: later paints over
    const int cx = center_x_at(s, t_ms);
    const int cy = center_y_at(s, t_ms);
    const int ext = static_cast<int>(std::ceil(std::max(s.half_w, s.half_h))) + 1;
    const int y0 = std::max(0, cy - ext), y1 = std::min(height - 1, cy + ext);
    const int x0 = std::max(0, cx - ext), x1 = std::min(width - 1, cx + ext);
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x)
        if (inside_shape(s, cx, cy, x, y)) out_cls[static_cast<size_t>(y) * width + x] = s.cls;
  }
}

std::vector<SynthSample> synth_dataset(uint64_t seed, int n_samples, int classes, int height,
                                       int width) {
  require_arg(classes >= 2, "synth_dataset: need at least background + one shape class");
  require_arg(height >= 32 && width >= 32, "synth_dataset: frame must be at least 32x32");
  require_arg(n_samples >= 0, "synth_dataset: negative sample count");

  const Rng master(seed);
  std::vector<SynthSample> out;
  out.reserve(static_cast<size_t>(n_samples));

  // class id -> intensity; distinct so overlaps still produce signed edges
  auto intensity_of = [](uint8_t cls) { return 0.2 + 0.15 * cls; };

  for (int si = 0; si < n_samples; ++si) {
    Rng rng = master.fork(static_cast<uint64_t>(si));
    SynthSample sample;
    sample.label.height = height;
    sample.label.width = width;
    sample.stream.width = static_cast<uint16_t>(width);
    sample.stream.height = static_cast<uint16_t>(height);

    const double base = std::min(height, width);
    for (int cls = 1; cls < classes; ++cls) {
      ShapeSpec s;
      s.cls = static_cast<uint8_t>(cls);
      s.kind = (cls - 1) % 3;
      s.half_w = rng.uniform(0.09 * base, 0.16 * base);
      s.half_h = s.kind == 0 ? rng.uniform(0.09 * base, 0.16 * base) : s.half_w;
      const double speed = rng.uniform(0.024, 0.056);  // px per ms
      const double angle = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
      s.vx = speed * std::cos(angle);
      s.vy = speed * std::sin(angle);
      const double travel = speed * kSynthWindowMs;
      const double mx = std::max(s.half_w, s.half_h) + travel + 2.0;
      // keep the whole trajectory on-sensor; retry a few times to limit overlap
      for (int attempt = 0; attempt < 20; ++attempt) {
        s.cx0 = rng.uniform(mx, width - 1 - mx);
        s.cy0 = rng.uniform(mx, height - 1 - mx);
        bool clear = true;
        for (const ShapeSpec& prev : sample.shapes) {
          const double dx = s.cx0 - prev.cx0, dy = s.cy0 - prev.cy0;
          const double min_d = std::max(s.half_w, s.half_h) +
                               std::max(prev.half_w, prev.half_h) + 4.0;
          if (dx * dx + dy * dy < min_d * min_d) clear = false;
        }
        if (clear) break;
      }
      sample.shapes.push_back(s);
    }

    // per-millisecond intensity diff -> events
    std::vector<uint8_t> prev_cls, cur_cls;
    rasterize_shapes_at(sample.shapes, 0, height, width, prev_cls);
    for (int t = 1; t < kSynthWindowMs; ++t) {
      rasterize_shapes_at(sample.shapes, t, height, width, cur_cls);
      for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
          const size_t i = static_cast<size_t>(y) * width + x;
          if (cur_cls[i] == prev_cls[i]) continue;
          const double d = intensity_of(cur_cls[i]) - intensity_of(prev_cls[i]);
          Event e;
          e.x = static_cast<uint16_t>(x);
          e.y = static_cast<uint16_t>(y);
          e.t_us = static_cast<int64_t>(t) * kSynthStepUs;
          e.p = d > 0 ? 1 : -1;
          sample.stream.events.push_back(e);
        }
      std::swap(prev_cls, cur_cls);
    }

    // label = interiors at the final micro-step (prev_cls after the swap)
    sample.label.ids = prev_cls;
    out.push_back(std::move(sample));
  }
  return out;
}

void write_synth_dataset(const std::string& dir, uint64_t seed, int n_samples, int classes,
                         int height, int width) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create dataset directory: " + dir);

  const auto samples = synth_dataset(seed, n_samples, classes, height, width);
  char name[64];
  for (size_t i = 0; i < samples.size(); ++i) {
    std::snprintf(name, sizeof(name), "sample_%05zu", i);
    write_events(samples[i].stream, dir + "/" + name + ".evs1");
    write_label_pgm(samples[i].label, dir + "/" + name + ".pgm");
  }

  nlohmann::json meta;
  meta["format"] = "sltnet-synth-v1";
  meta["seed"] = seed;
  meta["samples"] = n_samples;
  meta["classes"] = classes;
  meta["height"] = height;
  meta["width"] = width;
  std::ofstream out(dir + "/meta.json", std::ios::trunc);
  if (!out) throw IoError("cannot write meta.json in " + dir);
  out << meta.dump(2) << "\n";
}

}  // namespace sltnet
