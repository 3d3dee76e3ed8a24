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
#ifndef SLTNET_METRICS_HPP
#define SLTNET_METRICS_HPP

#include <cstdint>
#include <vector>

#include "sltnet/common.hpp"

namespace sltnet {

// Rows are ground truth, columns are predictions; ignore-id pixels never
// enter the matrix.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(int num_classes);

  void accumulate(const int32_t* pred, const int32_t* truth, int64_t count, int ignore_id);

  int64_t at(int truth, int pred) const {
    return counts_[static_cast<size_t>(truth) * classes_ + pred];
  }
  int64_t total() const;
  int num_classes() const { return classes_; }

 private:
  int classes_;
  std::vector<int64_t> counts_;
};

struct MiouResult {
  std::vector<double> per_class;    // NaN for classes with zero union
  std::vector<bool> has_union;
  double mean = 0.0;
};

// IoU_c = TP / (TP + FP + FN); classes absent from both prediction and truth
// are excluded from the mean.
MiouResult miou(const ConfusionMatrix& cm);

}  // namespace sltnet

#endif  // SLTNET_METRICS_HPP
