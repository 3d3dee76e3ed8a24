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
#include "sltnet/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

namespace sltnet {

namespace {

constexpr uint16_t kVersion = 1;

template <typename T>
void put_le(std::ostream& out, T v) {
  uint8_t buf[sizeof(T)];
  uint64_t u = 0;
  std::memcpy(&u, &v, sizeof(T));
  for (size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<uint8_t>(u >> (8 * i));
  out.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T get_le(std::istream& in) {
  uint8_t buf[sizeof(T)];
  in.read(reinterpret_cast<char*>(buf), sizeof(T));
  if (in.gcount() != static_cast<std::streamsize>(sizeof(T)))
    throw CorruptionError("checkpoint: unexpected end of file");
  uint64_t u = 0;
  for (size_t i = 0; i < sizeof(T); ++i) u |= static_cast<uint64_t>(buf[i]) << (8 * i);
  T v{};
  std::memcpy(&v, &u, sizeof(T));
  return v;
}

void put_string(std::ostream& out, const std::string& s) {
  put_le<uint32_t>(out, static_cast<uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& in) {
  const uint32_t n = get_le<uint32_t>(in);
  std::string s(n, '\0');
  in.read(s.data(), n);
  if (in.gcount() != static_cast<std::streamsize>(n))
    throw CorruptionError("checkpoint: truncated string field");
  return s;
}

}  // namespace

void write_tns1(std::ostream& out, const Tensor<float>& t) {
  out.write("TNS1", 4);
  out.put(static_cast<char>(t.rank()));
  for (int e : t.shape) put_le<uint32_t>(out, static_cast<uint32_t>(e));
  for (float v : t.v) put_le<float>(out, v);
}

Tensor<float> read_tns1(std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  if (in.gcount() != 4 || std::memcmp(magic, "TNS1", 4) != 0)
    throw FormatError("bad tensor magic (expected TNS1)");
  const int rank = in.get();
  if (rank < 0 || rank > 8) throw FormatError("tensor rank out of range");
  std::vector<int> shape(static_cast<size_t>(rank));
  for (auto& e : shape) e = static_cast<int>(get_le<uint32_t>(in));
  Tensor<float> t(shape);
  for (auto& v : t.v) v = get_le<float>(in);
  return t;
}

TrainState TrainState::fresh(const Network<float>& net, uint64_t seed) {
  TrainState ts;
  ts.rng_state = Rng(seed).state();
  for (const auto& e : net.store.entries())
    if (e.trainable) {
      ts.m.emplace_back(e.value->shape);
      ts.v.emplace_back(e.value->shape);
    }
  return ts;
}

void save_checkpoint(const std::string& path, const Network<float>& net, const TrainState& ts,
                     uint64_t config_digest, const std::string& config_text) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open checkpoint for writing: " + tmp);
    out.write("SLT1", 4);
    put_le<uint16_t>(out, kVersion);
    put_le<uint64_t>(out, config_digest);
    put_string(out, config_text);
    put_le<int32_t>(out, ts.epoch);
    put_le<int64_t>(out, ts.adam_step);
    for (uint64_t w : ts.rng_state) put_le<uint64_t>(out, w);

    put_le<uint32_t>(out, static_cast<uint32_t>(net.store.size()));
    for (const auto& e : net.store.entries()) {
      put_string(out, e.name);
      write_tns1(out, *e.value);
    }
    put_le<uint32_t>(out, static_cast<uint32_t>(ts.m.size()));
    for (size_t i = 0; i < ts.m.size(); ++i) {
      write_tns1(out, ts.m[i]);
      write_tns1(out, ts.v[i]);
    }
    if (!out) throw IoError("checkpoint write failed: " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move checkpoint into place: " + path);
}

CheckpointData read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  char magic[4];
  in.read(magic, 4);
  if (in.gcount() != 4 || std::memcmp(magic, "SLT1", 4) != 0)
    throw FormatError("bad checkpoint magic (expected SLT1): " + path);
  CheckpointData d;
  d.version = get_le<uint16_t>(in);
  if (d.version != kVersion)
    throw FormatError("unsupported checkpoint version " + std::to_string(d.version));
  d.config_digest = get_le<uint64_t>(in);
  d.config_text = get_string(in);
  d.epoch = get_le<int32_t>(in);
  d.adam_step = get_le<int64_t>(in);
  for (auto& w : d.rng_state) w = get_le<uint64_t>(in);

  const uint32_t n = get_le<uint32_t>(in);
  d.entries.reserve(n);
  for (uint32_t i = 0; i < n; ++i) {
    std::string name = get_string(in);
    d.entries.emplace_back(std::move(name), read_tns1(in));
  }
  const uint32_t nm = get_le<uint32_t>(in);
  for (uint32_t i = 0; i < nm; ++i) {
    d.m.push_back(read_tns1(in));
    d.v.push_back(read_tns1(in));
  }
  return d;
}

void apply_checkpoint(const CheckpointData& d, Network<float>& net, TrainState& ts) {
  auto& entries = net.store.entries();
  if (d.entries.size() != entries.size())
    throw FormatError("checkpoint entry count does not match the built network");
  for (size_t i = 0; i < entries.size(); ++i) {
    const auto& [name, value] = d.entries[i];
    if (name != entries[i].name)
      throw FormatError("checkpoint entry '" + name + "' does not match '" + entries[i].name +
                        "'");
    if (value.shape != entries[i].value->shape)
      throw FormatError("checkpoint entry '" + name + "' has mismatched shape");
    *entries[i].value = value;
  }
  ts = TrainState::fresh(net, 0);
  ts.epoch = d.epoch;
  ts.adam_step = d.adam_step;
  ts.rng_state = d.rng_state;
  if (!d.m.empty()) {
    if (d.m.size() != ts.m.size()) throw FormatError("checkpoint moment count mismatch");
    ts.m = d.m;
    ts.v = d.v;
  }
}

}  // namespace sltnet
