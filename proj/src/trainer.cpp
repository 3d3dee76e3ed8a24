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
#include "sltnet/trainer.hpp"

#include <omp.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <csignal>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "sltnet/gemm.hpp"
#include "sltnet/synth.hpp"

namespace sltnet {

namespace fs = std::filesystem;

namespace {

std::atomic<bool> g_interrupted{false};

void sigint_handler(int) { g_interrupted.store(true); }

void flip_voxel_w(Tensor<float>& v) {
  const int k = v.dim(0), h = v.dim(1), w = v.dim(2);
  for (int a = 0; a < k; ++a)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w / 2; ++x) std::swap(v.at3(a, y, x), v.at3(a, y, w - 1 - x));
}

void flip_label_w(LabelMap& m) {
  for (int y = 0; y < m.height; ++y)
    for (int x = 0; x < m.width / 2; ++x) std::swap(m.at(y, x), m.at(y, m.width - 1 - x));
}

// (N, K, H, W) batch tensor replicated per time step
std::vector<std::shared_ptr<Tensor<float>>> make_steps(const std::vector<Tensor<float>>& grids,
                                                       int time_steps) {
  const int n = static_cast<int>(grids.size());
  const int k = grids[0].dim(0), h = grids[0].dim(1), w = grids[0].dim(2);
  auto batch = std::make_shared<Tensor<float>>(std::vector<int>{n, k, h, w});
  const int64_t slice = static_cast<int64_t>(k) * h * w;
  for (int i = 0; i < n; ++i)
    std::copy(grids[static_cast<size_t>(i)].v.begin(), grids[static_cast<size_t>(i)].v.end(),
              batch->v.begin() + i * slice);
  std::vector<std::shared_ptr<Tensor<float>>> steps(static_cast<size_t>(time_steps), batch);
  return steps;
}

void append_jsonl(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::app);
  if (!out) throw IoError("cannot append to log: " + path);
  out << j.dump() << "\n";
}

}  // namespace

Dataset load_dataset(const std::string& dir, int64_t dt_us, int bins) {
  const fs::path meta_path = fs::path(dir) / "meta.json";
  std::ifstream meta_in(meta_path);
  if (!meta_in) throw IoError("dataset: cannot open " + meta_path.string());
  nlohmann::json meta = nlohmann::json::parse(meta_in, nullptr, /*allow_exceptions=*/false);
  if (meta.is_discarded()) throw FormatError("dataset: malformed meta.json in " + dir);

  Dataset ds;
  ds.classes = meta.at("classes").get<int>();
  ds.height = meta.at("height").get<int>();
  ds.width = meta.at("width").get<int>();
  ds.bins = bins;

  std::vector<std::string> stems;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name.size() > 5 && name.substr(name.size() - 5) == ".evs1")
      stems.push_back(name.substr(0, name.size() - 5));
  }
  std::sort(stems.begin(), stems.end());
  if (stems.empty()) throw ValidationError("dataset: no .evs1 samples in " + dir);

  for (const auto& stem : stems) {
    EventStream s = read_events((fs::path(dir) / (stem + ".evs1")).string());
    require_valid(s.height == ds.height && s.width == ds.width,
                  "dataset: sample extent mismatch in " + stem);
    ds.voxels.push_back(voxelize(s, dt_us, bins).values);
    LabelMap label = read_label_pgm((fs::path(dir) / (stem + ".pgm")).string());
    require_valid(label.height == ds.height && label.width == ds.width,
                  "dataset: label extent mismatch in " + stem);
    ds.labels.push_back(std::move(label));
  }
  return ds;
}

void split_dataset(size_t n, double val_fraction, std::vector<size_t>& train_idx,
                   std::vector<size_t>& val_idx) {
  train_idx.clear();
  val_idx.clear();
  const size_t n_val = static_cast<size_t>(std::llround(val_fraction * static_cast<double>(n)));
  const size_t n_train = n - n_val;
  for (size_t i = 0; i < n_train; ++i) train_idx.push_back(i);
  for (size_t i = n_train; i < n; ++i) val_idx.push_back(i);
}

std::vector<int32_t> argmax_logits(const Tensor<float>& logits) {
  const int n = logits.dim(0), c = logits.dim(1);
  const int64_t hw = static_cast<int64_t>(logits.dim(2)) * logits.dim(3);
  std::vector<int32_t> out(static_cast<size_t>(n * hw));
  for (int ni = 0; ni < n; ++ni)
    for (int64_t px = 0; px < hw; ++px) {
      int best = 0;
      float bv = logits.v[(static_cast<int64_t>(ni) * c) * hw + px];
      for (int ci = 1; ci < c; ++ci) {
        const float v = logits.v[(static_cast<int64_t>(ni) * c + ci) * hw + px];
        if (v > bv) {
          bv = v;
          best = ci;
        }
      }
      out[static_cast<size_t>(ni * hw + px)] = best;
    }
  return out;
}

MiouResult evaluate(Network<float>& net, const Dataset& ds, const std::vector<size_t>& indices,
                    int batch, int time_steps, int ignore_id) {
  ConfusionMatrix cm(ds.classes);
  for (size_t at = 0; at < indices.size(); at += static_cast<size_t>(batch)) {
    const size_t end = std::min(indices.size(), at + static_cast<size_t>(batch));
    std::vector<Tensor<float>> grids;
    std::vector<const LabelMap*> labels;
    for (size_t i = at; i < end; ++i) {
      grids.push_back(ds.voxels[indices[i]]);
      labels.push_back(&ds.labels[indices[i]]);
    }
    Tape<float> tape;
    ForwardOptions<float> opt;  // eval mode, hard spikes
    auto out = net.forward(tape, make_steps(grids, time_steps), opt);
    const auto pred = argmax_logits(tape.val(out.p1));
    LabelBatch truth = LabelBatch::from(labels);
    cm.accumulate(pred.data(), truth.v.data(), truth.numel(), ignore_id);
  }
  return miou(cm);
}

TrainResult train_run(const RunConfig& cfg, const std::string& data_dir,
                      const std::string& out_dir, const std::string& resume_path) {
  cfg.validate();
  if (cfg.threads > 0) set_worker_threads(cfg.threads);

  fs::create_directories(out_dir);
  const std::string log_path = (fs::path(out_dir) / "metrics.jsonl").string();
  const std::string last_path = (fs::path(out_dir) / "last.slt").string();
  const std::string best_path = (fs::path(out_dir) / "best.slt").string();
  {
    std::ofstream rc((fs::path(out_dir) / "resolved_config.txt").string(), std::ios::trunc);
    rc << cfg.canonical_text();
  }

  Dataset ds = load_dataset(data_dir, cfg.dt_us, cfg.bins);
  require_valid(ds.classes == cfg.classes, "train: dataset class count differs from config");
  require_valid(!ds.voxels.empty(), "train: dataset is empty");
  std::vector<size_t> train_idx, val_idx;
  split_dataset(ds.size(), cfg.val_fraction, train_idx, val_idx);
  require_valid(!train_idx.empty(), "train: empty training split");

  Network<float> net(cfg.network(), cfg.seed);
  TrainState ts = TrainState::fresh(net, cfg.seed ^ 0x7261696e5f726e67ULL);
  if (!resume_path.empty()) {
    CheckpointData d = read_checkpoint(resume_path);
    if (d.config_digest != cfg.digest())
      throw ConfigError("resume: checkpoint config digest does not match this run");
    apply_checkpoint(d, net, ts);
  }

  const OptimConfig optim = cfg.optim();
  const LossConfig loss_cfg = cfg.loss();
  const std::string digest_hex = cfg.digest_hex();

  auto prev_handler = std::signal(SIGINT, sigint_handler);
  g_interrupted.store(false);

  TrainResult result;
  Rng rng;
  rng.set_state(ts.rng_state);

  for (int epoch = ts.epoch; epoch < cfg.epochs; ++epoch) {
    const double k_i = evaf_k(epoch, cfg.epochs, cfg.k_min, cfg.k_max);
    const double lr_now = step_lr(epoch, optim);

    std::vector<size_t> order = train_idx;
    rng.shuffle(order);

    double loss_sum = 0;
    int64_t loss_batches = 0;
    for (size_t at = 0; at < order.size() && !g_interrupted.load();
         at += static_cast<size_t>(cfg.batch)) {
      const size_t end = std::min(order.size(), at + static_cast<size_t>(cfg.batch));
      std::vector<Tensor<float>> grids;
      std::vector<LabelMap> flipped;
      std::vector<const LabelMap*> labels;
      grids.reserve(end - at);
      for (size_t i = at; i < end; ++i) {
        Tensor<float> g = ds.voxels[order[i]];
        const LabelMap& l = ds.labels[order[i]];
        if (cfg.hflip && rng.uniform() < 0.5) {
          flip_voxel_w(g);
          flipped.push_back(l);
          flip_label_w(flipped.back());
        } else {
          flipped.push_back(l);
        }
        grids.push_back(std::move(g));
      }
      for (const auto& l : flipped) labels.push_back(&l);

      Tape<float> tape;
      ForwardOptions<float> opt;
      opt.training = true;
      opt.update_bn = true;
      opt.surrogate_k = static_cast<float>(k_i);
      auto out = net.forward(tape, make_steps(grids, cfg.time_steps), opt);
      LabelBatch truth = LabelBatch::from(labels);
      Var loss = total_loss(tape, out.p1, out.p2, truth, loss_cfg);
      const double loss_val = static_cast<double>(tape.val(loss)[0]);
      if (!std::isfinite(loss_val)) {
        nlohmann::json j;
        j["event"] = "nan_abort";
        j["epoch"] = epoch;
        j["batch_start"] = at;
        j["digest"] = digest_hex;
        append_jsonl(log_path, j);
        std::signal(SIGINT, prev_handler);
        throw Error("training aborted: non-finite loss at epoch " + std::to_string(epoch));
      }
      net.store.zero_grads();
      tape.backward(loss);
      adam_step(net.store, ts.m, ts.v, ++ts.adam_step, optim, lr_now);
      loss_sum += loss_val;
      ++loss_batches;
    }

    EpochLog el;
    el.epoch = epoch;
    el.lr = lr_now;
    el.surrogate_k = k_i;
    el.train_loss = loss_batches ? loss_sum / static_cast<double>(loss_batches) : 0.0;

    const bool interrupted = g_interrupted.load();
    if (!interrupted && !val_idx.empty() &&
        ((epoch + 1) % cfg.val_every == 0 || epoch + 1 == cfg.epochs)) {
      el.val_miou =
          evaluate(net, ds, val_idx, std::min(cfg.batch, 8), cfg.time_steps, cfg.ignore_id).mean;
    }

    ts.epoch = epoch + (interrupted ? 0 : 1);  // an interrupted epoch is retried on resume
    ts.rng_state = rng.state();
    save_checkpoint(last_path, net, ts, cfg.digest(), cfg.canonical_text());
    result.last_checkpoint = last_path;
    if (el.val_miou && *el.val_miou > result.best_miou) {
      result.best_miou = *el.val_miou;
      save_checkpoint(best_path, net, ts, cfg.digest(), cfg.canonical_text());
      result.best_checkpoint = best_path;
    }

    nlohmann::json j;
    j["epoch"] = epoch;
    j["lr"] = el.lr;
    j["K"] = el.surrogate_k;
    j["train_loss"] = el.train_loss;
    if (el.val_miou)
      j["val_miou"] = *el.val_miou;
    else
      j["val_miou"] = nullptr;
    if (interrupted) j["event"] = "interrupted";
    j["digest"] = digest_hex;
    append_jsonl(log_path, j);
    result.log.push_back(el);
    result.epochs_run = epoch + 1;

    if (interrupted) {
      result.interrupted = true;
      break;
    }
    if (cfg.stop_at_miou > 0.0 && el.val_miou && *el.val_miou >= cfg.stop_at_miou) {
      result.reached_stop_target = true;
      break;
    }
  }

  std::signal(SIGINT, prev_handler);
  return result;
}

}  // namespace sltnet
