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
#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>

#include "sltnet/bench.hpp"
#include "sltnet/checkpoint.hpp"
#include "sltnet/config.hpp"
#include "sltnet/energy.hpp"
#include "sltnet/gemm.hpp"
#include "sltnet/synth.hpp"
#include "sltnet/trainer.hpp"

namespace {

using namespace sltnet;

std::pair<int, int> parse_size(const std::string& s) {
  const auto x = s.find('x');
  if (x == std::string::npos)
    throw ArgumentError("size must be HxW (e.g. 64x64), got '" + s + "'");
  try {
    return {std::stoi(s.substr(0, x)), std::stoi(s.substr(x + 1))};
  } catch (const std::exception&) {
    throw ArgumentError("size must be HxW (e.g. 64x64), got '" + s + "'");
  }
}

void apply_overrides(RunConfig& cfg, const std::vector<std::string>& kvs) {
  for (const auto& kv : kvs) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw ConfigError("override must be key=value, got '" + kv + "'");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out << text;
  if (text.empty() || text.back() != '\n') out << "\n";
}

struct LoadedNet {
  RunConfig cfg;
  std::unique_ptr<Network<float>> net;
  TrainState ts;
};

LoadedNet load_net(const std::string& checkpoint_path) {
  LoadedNet ln;
  CheckpointData d = read_checkpoint(checkpoint_path);
  ln.cfg = RunConfig::from_text(d.config_text);
  if (ln.cfg.digest() != d.config_digest)
    throw FormatError("checkpoint config text does not match its stored digest");
  ln.net = std::make_unique<Network<float>>(ln.cfg.network(), ln.cfg.seed);
  apply_checkpoint(d, *ln.net, ln.ts);
  return ln;
}

int cmd_voxelize(const std::string& in, int64_t dt_us, int bins, const std::string& out) {
  EventStream s = read_events(in);
  VoxelGrid g = voxelize(s, dt_us, bins);
  std::ofstream f(out, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write " + out);
  write_tns1(f, g.values);
  std::printf("voxelized %zu events into %dx%dx%d bins -> %s\n", s.events.size(), g.bins,
              g.height, g.width, out.c_str());
  return 0;
}

int cmd_synth(uint64_t seed, int samples, int classes, const std::string& size,
              const std::string& out) {
  const auto [h, w] = parse_size(size);
  write_synth_dataset(out, seed, samples, classes, h, w);
  std::printf("wrote %d samples (%d classes, %dx%d) to %s\n", samples, classes, h, w,
              out.c_str());
  return 0;
}

int cmd_train(const std::string& config_path, const std::string& data, const std::string& out,
              const std::vector<std::string>& ablations, int64_t seed_override,
              const std::string& resume) {
  RunConfig cfg = config_path.empty() ? RunConfig{} : RunConfig::from_file(config_path);
  apply_overrides(cfg, ablations);
  if (seed_override >= 0) cfg.seed = static_cast<uint64_t>(seed_override);
  cfg.validate();
  std::printf("resolved config digest %s\n%s", cfg.digest_hex().c_str(),
              cfg.canonical_text().c_str());

  TrainResult r = train_run(cfg, data, out, resume);
  std::printf("trained %d epoch(s); best val mIoU %.4f%s%s\n", r.epochs_run, r.best_miou,
              r.reached_stop_target ? " (stop target reached)" : "",
              r.interrupted ? " (interrupted)" : "");
  std::printf("last checkpoint: %s\n", r.last_checkpoint.c_str());
  return 0;
}

int cmd_eval(const std::string& checkpoint, const std::string& data, const std::string& out) {
  LoadedNet ln = load_net(checkpoint);
  Dataset ds = load_dataset(data, ln.cfg.dt_us, ln.cfg.bins);
  if (ds.classes != ln.cfg.classes)
    throw ValidationError("eval: dataset class count differs from the checkpoint config");
  std::vector<size_t> all(ds.size());
  for (size_t i = 0; i < all.size(); ++i) all[i] = i;
  MiouResult r =
      evaluate(*ln.net, ds, all, 8, ln.cfg.time_steps, ln.cfg.ignore_id);

  std::printf("%-8s %s\n", "class", "IoU");
  nlohmann::json per = nlohmann::json::array();
  for (size_t c = 0; c < r.per_class.size(); ++c) {
    if (r.has_union[c]) {
      std::printf("%-8zu %.4f\n", c, r.per_class[c]);
      per.push_back(r.per_class[c]);
    } else {
      std::printf("%-8zu (absent)\n", c);
      per.push_back(nullptr);
    }
  }
  std::printf("%-8s %.4f\n", "mean", r.mean);

  nlohmann::json j;
  j["per_class_iou"] = per;
  j["miou"] = r.mean;
  j["samples"] = ds.size();
  j["config_digest"] = ln.cfg.digest_hex();
  if (!out.empty())
    write_text(out, j.dump(2));
  else
    std::printf("%s\n", j.dump(2).c_str());
  return 0;
}

int cmd_profile(const std::string& checkpoint, const std::string& size, bool measured,
                const std::string& data, const std::string& out) {
  LoadedNet ln = load_net(checkpoint);
  const auto [h, w] = parse_size(size);
  auto counts = count_ops(ln.net->graph, h, w);

  EnergyReport rep;
  if (!measured) {
    rep = estimate_energy(counts, ln.cfg.time_steps, 0.5);
  } else {
    ActivationRecord rec = ln.net->make_record();
    if (!data.empty()) {
      Dataset ds = load_dataset(data, ln.cfg.dt_us, ln.cfg.bins);
      const size_t n = std::min<size_t>(8, ds.size());
      for (size_t i = 0; i < n; ++i) {
        Tape<float> t;
        auto e = to_event_tensor(VoxelGrid{ln.cfg.bins, ds.height, ds.width, ds.voxels[i]},
                                 ln.cfg.time_steps);
        ln.net->forward(t, event_tensor_steps(e), ForwardOptions<float>{}, &rec);
      }
    } else {
      // deterministic synthetic sample at the requested extent
      auto samples = synth_dataset(ln.cfg.seed, 1, std::max(2, ln.cfg.classes), h, w);
      VoxelGrid g = voxelize(samples[0].stream, ln.cfg.dt_us, ln.cfg.bins);
      Tape<float> t;
      ln.net->forward(t, event_tensor_steps(to_event_tensor(g, ln.cfg.time_steps)),
                      ForwardOptions<float>{}, &rec);
    }
    rep = estimate_energy_measured(counts, ln.cfg.time_steps, measure_rates(rec));
  }
  rep.params = ln.net->store.trainable_params();
  rep.config_digest = ln.cfg.digest_hex();
  const std::string text = energy_report_json(rep);
  if (!out.empty())
    write_text(out, text);
  else
    std::printf("%s\n", text.c_str());
  return 0;
}

int cmd_bench(const std::string& config_path, const std::string& checkpoint,
              const std::string& size, int warmup, int iters) {
  const auto [h, w] = parse_size(size);
  FpsReport rep;
  if (!checkpoint.empty()) {
    LoadedNet ln = load_net(checkpoint);
    rep = benchmark_fps(*ln.net, h, w, warmup, iters, ln.cfg.digest_hex());
  } else {
    RunConfig cfg = config_path.empty() ? RunConfig{} : RunConfig::from_file(config_path);
    cfg.validate();
    Network<float> net(cfg.network(), cfg.seed);
    rep = benchmark_fps(net, h, w, warmup, iters, cfg.digest_hex());
  }
  std::printf("%s\n", fps_report_json(rep).c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"spike-driven event segmentation toolkit"};
  app.require_subcommand(1);

  // voxelize
  auto* vox = app.add_subcommand("voxelize", "encode an EVS1 event file into a voxel grid");
  std::string vox_in, vox_out;
  int64_t vox_dt = 50000;
  int vox_bins = 5;
  vox->add_option("--in", vox_in, "input .evs1 file")->required();
  vox->add_option("--dt-us", vox_dt, "bin width in microseconds");
  vox->add_option("--bins", vox_bins, "number of temporal bins K");
  vox->add_option("--out", vox_out, "output tensor file (TNS1)")->required();

  // synth-data
  auto* synth = app.add_subcommand("synth-data", "generate a moving-shapes event dataset");
  uint64_t sd_seed = 0;
  int sd_samples = 100, sd_classes = 4;
  std::string sd_size = "64x64", sd_out;
  synth->add_option("--seed", sd_seed, "master seed");
  synth->add_option("--samples", sd_samples, "number of samples")->required();
  synth->add_option("--classes", sd_classes, "classes including background");
  synth->add_option("--size", sd_size, "frame size HxW");
  synth->add_option("--out", sd_out, "output directory")->required();

  // train
  auto* train = app.add_subcommand("train", "train a network on a dataset directory");
  std::string tr_cfg, tr_data, tr_out, tr_resume;
  std::vector<std::string> tr_ablation;
  int64_t tr_seed = -1;
  train->add_option("--config", tr_cfg, "run config file (key=value lines)");
  train->add_option("--data", tr_data, "dataset directory")->required();
  train->add_option("--out", tr_out, "output directory for logs and checkpoints")->required();
  train->add_option("--ablation,--set", tr_ablation,
                    "config override key=value (repeatable; e.g. shortcut=sew, k=1.0)");
  train->add_option("--seed", tr_seed, "override the config seed");
  train->add_option("--resume", tr_resume, "resume from a checkpoint");

  // eval
  auto* ev = app.add_subcommand("eval", "per-class IoU of a checkpoint on a dataset");
  std::string ev_ckpt, ev_data, ev_out;
  ev->add_option("--checkpoint", ev_ckpt, "checkpoint file")->required();
  ev->add_option("--data", ev_data, "dataset directory")->required();
  ev->add_option("--out", ev_out, "write the JSON report here instead of stdout");

  // profile
  auto* prof = app.add_subcommand("profile", "MAC/ACC op counts and energy estimate");
  std::string pf_ckpt, pf_size = "64x64", pf_data, pf_out;
  bool pf_measured = false;
  prof->add_option("--checkpoint", pf_ckpt, "checkpoint file")->required();
  prof->add_option("--size", pf_size, "input size HxW");
  prof->add_flag("--measured-rates", pf_measured,
                 "substitute measured per-layer firing rates for the fixed R=0.5");
  prof->add_option("--data", pf_data, "dataset for rate measurement (up to 8 samples)");
  prof->add_option("--out", pf_out, "write the JSON report here instead of stdout");

  // bench
  auto* bench = app.add_subcommand("bench", "median forward latency and FPS");
  std::string bn_cfg, bn_ckpt, bn_size = "64x64";
  int bn_warmup = 3, bn_iters = 20;
  bench->add_option("--config", bn_cfg, "run config file");
  bench->add_option("--checkpoint", bn_ckpt, "checkpoint file (overrides --config)");
  bench->add_option("--size", bn_size, "input size HxW");
  bench->add_option("--warmup", bn_warmup, "warmup passes");
  bench->add_option("--iters", bn_iters, "timed passes");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*vox) return cmd_voxelize(vox_in, vox_dt, vox_bins, vox_out);
    if (*synth) return cmd_synth(sd_seed, sd_samples, sd_classes, sd_size, sd_out);
    if (*train) return cmd_train(tr_cfg, tr_data, tr_out, tr_ablation, tr_seed, tr_resume);
    if (*ev) return cmd_eval(ev_ckpt, ev_data, ev_out);
    if (*prof) return cmd_profile(pf_ckpt, pf_size, pf_measured, pf_data, pf_out);
    if (*bench) return cmd_bench(bn_cfg, bn_ckpt, bn_size, bn_warmup, bn_iters);
  } catch (const ArgumentError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const FormatError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const CorruptionError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "runtime error: %s\n", e.what());
    return 2;
  }
  return 0;
}
