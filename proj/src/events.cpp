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
#include "sltnet/events.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>

#include "sltnet/common.hpp"

namespace sltnet {

namespace {

constexpr char kMagic[4] = {'E', 'V', 'S', '1'};
constexpr size_t kHeaderBytes = 16;
constexpr size_t kRecordBytes = 14;

void put_u16(uint8_t* p, uint16_t v) {
  p[0] = static_cast<uint8_t>(v);
  p[1] = static_cast<uint8_t>(v >> 8);
}

void put_u64(uint8_t* p, uint64_t v) {
  for (int i = 0; i < 8; ++i) p[i] = static_cast<uint8_t>(v >> (8 * i));
}

uint16_t get_u16(const uint8_t* p) { return static_cast<uint16_t>(p[0] | (p[1] << 8)); }

uint64_t get_u64(const uint8_t* p) {
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(p[i]) << (8 * i);
  return v;
}

void validate_stream(const EventStream& s) {
  int64_t prev_t = -1;
  for (const Event& e : s.events) {
    require_valid(e.x < s.width && e.y < s.height, "event out of sensor bounds");
    require_valid(e.p == 1 || e.p == -1, "event polarity must be -1 or +1");
    require_valid(e.t_us >= 0, "event timestamp must be non-negative");
    require_valid(e.t_us >= prev_t, "event timestamps must be non-decreasing");
    prev_t = e.t_us;
  }
}

}  // namespace

EventStream read_events(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open event file: " + path);

  uint8_t header[kHeaderBytes];
  in.read(reinterpret_cast<char*>(header), kHeaderBytes);
  if (in.gcount() != static_cast<std::streamsize>(kHeaderBytes))
    throw FormatError("event file too short for EVS1 header: " + path);
  if (std::memcmp(header, kMagic, 4) != 0)
    throw FormatError("bad magic (expected EVS1): " + path);

  EventStream s;
  s.width = get_u16(header + 4);
  s.height = get_u16(header + 6);
  const uint64_t n = get_u64(header + 8);
  s.events.reserve(n);

  std::vector<uint8_t> buf(kRecordBytes);
  for (uint64_t i = 0; i < n; ++i) {
    in.read(reinterpret_cast<char*>(buf.data()), kRecordBytes);
    if (in.gcount() != static_cast<std::streamsize>(kRecordBytes))
      throw CorruptionError("truncated event record " + std::to_string(i) + " in " + path);
    Event e;
    e.x = get_u16(buf.data());
    e.y = get_u16(buf.data() + 2);
    e.t_us = static_cast<int64_t>(get_u64(buf.data() + 4));
    e.p = static_cast<int8_t>(buf[12]);
    s.events.push_back(e);
  }
  char extra;
  if (in.read(&extra, 1))
    throw CorruptionError("trailing bytes after " + std::to_string(n) + " records in " + path);
  validate_stream(s);
  return s;
}

void write_events(const EventStream& stream, const std::string& path) {
  validate_stream(stream);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open event file for writing: " + path);

  uint8_t header[kHeaderBytes];
  std::memcpy(header, kMagic, 4);
  put_u16(header + 4, stream.width);
  put_u16(header + 6, stream.height);
  put_u64(header + 8, stream.events.size());
  out.write(reinterpret_cast<const char*>(header), kHeaderBytes);

  std::vector<uint8_t> buf(kRecordBytes);
  for (const Event& e : stream.events) {
    put_u16(buf.data(), e.x);
    put_u16(buf.data() + 2, e.y);
    put_u64(buf.data() + 4, static_cast<uint64_t>(e.t_us));
    buf[12] = static_cast<uint8_t>(e.p);
    buf[13] = 0;
    out.write(reinterpret_cast<const char*>(buf.data()), kRecordBytes);
  }
  if (!out) throw IoError("write failed: " + path);
}

VoxelGrid voxelize(const EventStream& stream, int64_t dt_us, int bins) {
  require_arg(dt_us > 0, "voxelize: dt_us must be positive");
  require_arg(bins > 0, "voxelize: bin count must be positive");
  VoxelGrid g;
  g.bins = bins;
  g.height = stream.height;
  g.width = stream.width;
  g.values = Tensor<float>({bins, stream.height, stream.width});
  for (const Event& e : stream.events) {
    const int64_t k = e.t_us / dt_us;
    if (k >= bins) continue;  // beyond the K-th bin: discarded, not clamped
    g.values.at3(static_cast<int>(k), e.y, e.x) += static_cast<float>(e.p);
  }
  return g;
}

Tensor<float> to_event_tensor(const VoxelGrid& grid, int time_steps) {
  require_arg(time_steps >= 1, "to_event_tensor: time steps must be >= 1");
  Tensor<float> out({time_steps, grid.bins, grid.height, grid.width});
  const int64_t slice = grid.values.numel();
  for (int t = 0; t < time_steps; ++t)
    std::copy(grid.values.v.begin(), grid.values.v.end(), out.v.begin() + t * slice);
  return out;
}

LabelMap read_label_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open label file: " + path);
  std::string magic;
  in >> magic;
  if (magic != "P5") throw FormatError("label file is not binary PGM (P5): " + path);
  auto next_int = [&in, &path]() {
    // skip whitespace and '#' comments
    int c;
    while ((c = in.peek()) != EOF) {
      if (c == '#') {
        std::string line;
        std::getline(in, line);
      } else if (std::isspace(c)) {
        in.get();
      } else {
        break;
      }
    }
    int v;
    if (!(in >> v)) throw FormatError("malformed PGM header: " + path);
    return v;
  };
  LabelMap m;
  m.width = next_int();
  m.height = next_int();
  const int maxval = next_int();
  if (maxval != 255) throw FormatError("label PGM must use maxval 255: " + path);
  in.get();  // single whitespace after maxval
  m.ids.resize(static_cast<size_t>(m.width) * m.height);
  in.read(reinterpret_cast<char*>(m.ids.data()), static_cast<std::streamsize>(m.ids.size()));
  if (in.gcount() != static_cast<std::streamsize>(m.ids.size()))
    throw CorruptionError("truncated PGM pixel data: " + path);
  return m;
}

void write_label_pgm(const LabelMap& label, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open label file for writing: " + path);
  out << "P5\n" << label.width << " " << label.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(label.ids.data()),
            static_cast<std::streamsize>(label.ids.size()));
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace sltnet
