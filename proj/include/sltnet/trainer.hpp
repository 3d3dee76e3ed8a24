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
#ifndef SLTNET_TRAINER_HPP
#define SLTNET_TRAINER_HPP

#include <optional>
#include <string>
#include <vector>

#include "sltnet/checkpoint.hpp"
#include "sltnet/config.hpp"
#include "sltnet/metrics.hpp"

namespace sltnet {

// Voxelized samples kept in memory; desk-scale datasets are small.
struct Dataset {
  int classes = 0;
  int height = 0;
  int width = 0;
  int bins = 0;
  std::vector<Tensor<float>> voxels;  // (K, H, W) per sample
  std::vector<LabelMap> labels;

  size_t size() const { return voxels.size(); }
};

Dataset load_dataset(const std::string& dir, int64_t dt_us, int bins);

struct EpochLog {
  int epoch = 0;
  double lr = 0, surrogate_k = 0, train_loss = 0;
  std::optional<double> val_miou;
};

struct TrainResult {
  double best_miou = 0.0;
  int epochs_run = 0;
  bool reached_stop_target = false;
  bool interrupted = false;
  std::string last_checkpoint, best_checkpoint;
  std::vector<EpochLog> log;
};

// Full training run: seeded shuffling, EvAF K(i) advanced once per epoch,
// StepLR, OHEM+early loss, Adam, JSONL metrics, checkpoint per epoch.
// SIGINT finishes the current batch, checkpoints and returns.
TrainResult train_run(const RunConfig& cfg, const std::string& data_dir,
                      const std::string& out_dir, const std::string& resume_path = "");

// P1-argmax evaluation over the given sample indices.
MiouResult evaluate(Network<float>& net, const Dataset& ds, const std::vector<size_t>& indices,
                    int batch, int time_steps, int ignore_id);

// Tail split: the last val_fraction of samples form the validation set.
void split_dataset(size_t n, double val_fraction, std::vector<size_t>& train_idx,
                   std::vector<size_t>& val_idx);

std::vector<int32_t> argmax_logits(const Tensor<float>& logits);

}  // namespace sltnet

#endif  // SLTNET_TRAINER_HPP
