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
#include "sltnet/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace sltnet {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

int to_int(const std::string& k, const std::string& v) {
  try {
    size_t pos = 0;
    const int x = std::stoi(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config: key '" + k + "' expects an integer, got '" + v + "'");
  }
}

int64_t to_i64(const std::string& k, const std::string& v) {
  try {
    size_t pos = 0;
    const int64_t x = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config: key '" + k + "' expects an integer, got '" + v + "'");
  }
}

uint64_t to_u64(const std::string& k, const std::string& v) {
  try {
    size_t pos = 0;
    const uint64_t x = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config: key '" + k + "' expects an unsigned integer, got '" + v + "'");
  }
}

double to_double(const std::string& k, const std::string& v) {
  try {
    size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config: key '" + k + "' expects a number, got '" + v + "'");
  }
}

bool to_bool(const std::string& k, const std::string& v) {
  std::string s = v;
  std::transform(s.begin(), s.end(), s.begin(), ::tolower);
  if (s == "true" || s == "1" || s == "on" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "off" || s == "no") return false;
  throw ConfigError("config: key '" + k + "' expects a boolean, got '" + v + "'");
}

std::array<int, 3> to_dils(const std::string& k, const std::string& v) {
  std::array<int, 3> out{};
  std::stringstream ss(v);
  std::string item;
  int i = 0;
  while (std::getline(ss, item, ',')) {
    if (i >= 3) throw ConfigError("config: key '" + k + "' expects three comma-separated rates");
    out[static_cast<size_t>(i++)] = to_int(k, trim(item));
  }
  if (i != 3) throw ConfigError("config: key '" + k + "' expects three comma-separated rates");
  return out;
}

std::string dils_str(const std::array<int, 3>& d) {
  return std::to_string(d[0]) + "," + std::to_string(d[1]) + "," + std::to_string(d[2]);
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

uint64_t fnv1a64(const std::string& s) {
  uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_text(ss.str());
}

RunConfig RunConfig::from_text(const std::string& text) {
  RunConfig cfg;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: line " + std::to_string(lineno) + " is not key=value: '" + line +
                        "'");
    cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return cfg;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  if (key == "seed") seed = to_u64(key, value);
  else if (key == "classes") classes = to_int(key, value);
  else if (key == "bins") bins = to_int(key, value);
  else if (key == "dt_us") dt_us = to_i64(key, value);
  else if (key == "time_steps") time_steps = to_int(key, value);
  else if (key == "val_fraction") val_fraction = to_double(key, value);
  else if (key == "hflip") hflip = to_bool(key, value);
  else if (key == "base_channels") base_channels = to_int(key, value);
  else if (key == "ca_reduction") ca_reduction = to_int(key, value);
  else if (key == "stb_heads") stb_heads = to_int(key, value);
  else if (key == "stb_mlp_ratio") stb_mlp_ratio = to_int(key, value);
  else if (key == "dilations_stage1") dilations_stage1 = to_dils(key, value);
  else if (key == "dilations_stage2") dilations_stage2 = to_dils(key, value);
  else if (key == "dilations_stage3") dilations_stage3 = to_dils(key, value);
  else if (key == "dilations_decoder") dilations_decoder = to_dils(key, value);
  else if (key == "shortcut") {
    if (value != "ms" && value != "vs" && value != "sew")
      throw ConfigError("config: shortcut must be ms, vs or sew");
    shortcut = value;
  } else if (key == "enable_fe" || key == "fe") enable_fe = to_bool(key, value);
  else if (key == "enable_stb" || key == "stb") enable_stb = to_bool(key, value);
  else if (key == "enable_skip_fusion" || key == "fusion") enable_skip_fusion = to_bool(key, value);
  else if (key == "tau") tau = to_double(key, value);
  else if (key == "u_th") u_th = to_double(key, value);
  else if (key == "u_reset") u_reset = to_double(key, value);
  else if (key == "k_min") k_min = to_double(key, value);
  else if (key == "k_max") k_max = to_double(key, value);
  else if (key == "epochs") epochs = to_int(key, value);
  else if (key == "batch") batch = to_int(key, value);
  else if (key == "step_size") step_size = to_int(key, value);
  else if (key == "lr") lr = to_double(key, value);
  else if (key == "weight_decay") weight_decay = to_double(key, value);
  else if (key == "beta1") beta1 = to_double(key, value);
  else if (key == "beta2") beta2 = to_double(key, value);
  else if (key == "gamma") gamma = to_double(key, value);
  else if (key == "lambda1") lambda1 = to_double(key, value);
  else if (key == "lambda2") lambda2 = to_double(key, value);
  else if (key == "ohem_k" || key == "k") ohem_k = to_double(key, value);
  else if (key == "ignore_id") ignore_id = to_int(key, value);
  else if (key == "stop_at_miou") stop_at_miou = to_double(key, value);
  else if (key == "val_every") val_every = to_int(key, value);
  else if (key == "threads") threads = to_int(key, value);
  else throw ConfigError("config: unknown key '" + key + "'");
}

std::string RunConfig::canonical_text() const {
  std::ostringstream os;
  os << "base_channels=" << base_channels << "\n";
  os << "batch=" << batch << "\n";
  os << "beta1=" << fmt_double(beta1) << "\n";
  os << "beta2=" << fmt_double(beta2) << "\n";
  os << "bins=" << bins << "\n";
  os << "ca_reduction=" << ca_reduction << "\n";
  os << "classes=" << classes << "\n";
  os << "dilations_decoder=" << dils_str(dilations_decoder) << "\n";
  os << "dilations_stage1=" << dils_str(dilations_stage1) << "\n";
  os << "dilations_stage2=" << dils_str(dilations_stage2) << "\n";
  os << "dilations_stage3=" << dils_str(dilations_stage3) << "\n";
  os << "dt_us=" << dt_us << "\n";
  os << "enable_fe=" << (enable_fe ? "true" : "false") << "\n";
  os << "enable_skip_fusion=" << (enable_skip_fusion ? "true" : "false") << "\n";
  os << "enable_stb=" << (enable_stb ? "true" : "false") << "\n";
  os << "epochs=" << epochs << "\n";
  os << "gamma=" << fmt_double(gamma) << "\n";
  os << "hflip=" << (hflip ? "true" : "false") << "\n";
  os << "ignore_id=" << ignore_id << "\n";
  os << "k_max=" << fmt_double(k_max) << "\n";
  os << "k_min=" << fmt_double(k_min) << "\n";
  os << "lambda1=" << fmt_double(lambda1) << "\n";
  os << "lambda2=" << fmt_double(lambda2) << "\n";
  os << "lr=" << fmt_double(lr) << "\n";
  os << "ohem_k=" << fmt_double(ohem_k) << "\n";
  os << "seed=" << seed << "\n";
  os << "shortcut=" << shortcut << "\n";
  os << "stb_heads=" << stb_heads << "\n";
  os << "stb_mlp_ratio=" << stb_mlp_ratio << "\n";
  os << "step_size=" << step_size << "\n";
  os << "stop_at_miou=" << fmt_double(stop_at_miou) << "\n";
  os << "tau=" << fmt_double(tau) << "\n";
  os << "threads=" << threads << "\n";
  os << "time_steps=" << time_steps << "\n";
  os << "u_reset=" << fmt_double(u_reset) << "\n";
  os << "u_th=" << fmt_double(u_th) << "\n";
  os << "val_every=" << val_every << "\n";
  os << "val_fraction=" << fmt_double(val_fraction) << "\n";
  os << "weight_decay=" << fmt_double(weight_decay) << "\n";
  return os.str();
}

uint64_t RunConfig::digest() const { return fnv1a64(canonical_text()); }

std::string RunConfig::digest_hex() const {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(digest()));
  return buf;
}

void RunConfig::validate() const {
  network().validate();
  optim().validate();
  loss().validate();
  if (dt_us <= 0) throw ConfigError("config: dt_us must be positive");
  if (val_fraction < 0.0 || val_fraction >= 1.0)
    throw ConfigError("config: val_fraction must lie in [0, 1)");
  if (val_every < 1) throw ConfigError("config: val_every must be >= 1");
  if (k_min <= 0.0 || k_max < k_min) throw ConfigError("config: require 0 < k_min <= k_max");
}

NetworkConfig RunConfig::network() const {
  NetworkConfig n;
  n.base_channels = base_channels;
  n.input_bins = bins;
  n.num_classes = classes;
  n.time_steps = time_steps;
  n.ca_reduction = ca_reduction;
  n.stb_heads = stb_heads;
  n.stb_mlp_ratio = stb_mlp_ratio;
  n.dilations_stage1 = dilations_stage1;
  n.dilations_stage2 = dilations_stage2;
  n.dilations_stage3 = dilations_stage3;
  n.dilations_decoder = dilations_decoder;
  n.shortcut = shortcut == "ms"   ? ShortcutKind::ms
               : shortcut == "vs" ? ShortcutKind::vs
                                  : ShortcutKind::sew;
  n.enable_fe = enable_fe;
  n.enable_stb = enable_stb;
  n.enable_skip_fusion = enable_skip_fusion;
  n.tau = tau;
  n.u_th = u_th;
  n.u_reset = u_reset;
  n.k_min = k_min;
  n.k_max = k_max;
  return n;
}

OptimConfig RunConfig::optim() const {
  OptimConfig o;
  o.lr = lr;
  o.weight_decay = weight_decay;
  o.beta1 = beta1;
  o.beta2 = beta2;
  o.epochs = epochs;
  o.batch = batch;
  o.step_size = step_size;
  o.gamma = gamma;
  return o;
}

LossConfig RunConfig::loss() const {
  LossConfig l;
  l.lambda1 = lambda1;
  l.lambda2 = lambda2;
  l.ohem_k = ohem_k;
  l.ignore_id = ignore_id;
  return l;
}

}  // namespace sltnet
