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
#include "sltnet/metrics.hpp"

#include <cmath>
#include <limits>

namespace sltnet {

ConfusionMatrix::ConfusionMatrix(int num_classes) : classes_(num_classes) {
  require_arg(num_classes >= 2, "confusion matrix: need at least two classes");
  counts_.assign(static_cast<size_t>(num_classes) * num_classes, 0);
}

void ConfusionMatrix::accumulate(const int32_t* pred, const int32_t* truth, int64_t count,
                                 int ignore_id) {
  for (int64_t i = 0; i < count; ++i) {
    const int32_t t = truth[i];
    if (t == ignore_id) continue;
    require_valid(t >= 0 && t < classes_, "confusion matrix: truth label out of range");
    require_valid(pred[i] >= 0 && pred[i] < classes_,
                  "confusion matrix: prediction out of range");
    ++counts_[static_cast<size_t>(t) * classes_ + pred[i]];
  }
}

int64_t ConfusionMatrix::total() const {
  int64_t n = 0;
  for (int64_t c : counts_) n += c;
  return n;
}

MiouResult miou(const ConfusionMatrix& cm) {
  require_valid(cm.total() > 0, "miou: confusion matrix is empty");
  const int c = cm.num_classes();
  MiouResult r;
  r.per_class.assign(static_cast<size_t>(c), std::numeric_limits<double>::quiet_NaN());
  r.has_union.assign(static_cast<size_t>(c), false);
  double sum = 0;
  int n = 0;
  for (int k = 0; k < c; ++k) {
    int64_t tp = cm.at(k, k), row = 0, col = 0;
    for (int j = 0; j < c; ++j) {
      row += cm.at(k, j);
      col += cm.at(j, k);
    }
    const int64_t uni = row + col - tp;
    if (uni == 0) continue;  // class absent from both: excluded from the mean
    r.per_class[static_cast<size_t>(k)] = static_cast<double>(tp) / static_cast<double>(uni);
    r.has_union[static_cast<size_t>(k)] = true;
    sum += r.per_class[static_cast<size_t>(k)];
    ++n;
  }
  r.mean = n ? sum / n : 0.0;
  return r;
}

}  // namespace sltnet
