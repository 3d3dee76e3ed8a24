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
#ifndef SLTNET_PARAMS_HPP
#define SLTNET_PARAMS_HPP

#include <memory>
#include <string>
#include <vector>

#include "sltnet/tape.hpp"

namespace sltnet {

// Owns every learnable tensor and non-trainable buffer (BN running stats).
// Grads persist across tapes until zero_grads(); the tape accumulates into
// them via param sinks.
template <typename R>
class ParamStore {
 public:
  struct Entry {
    std::string name;
    std::shared_ptr<Tensor<R>> value;
    Tensor<R> grad;
    bool trainable = true;
  };

  int add(std::string name, Tensor<R> value, bool trainable = true) {
    Entry e;
    e.name = std::move(name);
    e.grad = Tensor<R>(value.shape);
    e.value = std::make_shared<Tensor<R>>(std::move(value));
    e.trainable = trainable;
    entries_.push_back(std::move(e));
    return static_cast<int>(entries_.size()) - 1;
  }

  Entry& operator[](int id) { return entries_[static_cast<size_t>(id)]; }
  const Entry& operator[](int id) const { return entries_[static_cast<size_t>(id)]; }

  std::vector<Entry>& entries() { return entries_; }
  const std::vector<Entry>& entries() const { return entries_; }
  size_t size() const { return entries_.size(); }

  Var var(Tape<R>& t, int id) {
    Entry& e = entries_[static_cast<size_t>(id)];
    return e.trainable ? t.param(e.value, &e.grad) : t.leaf(e.value);
  }

  void zero_grads() {
    for (auto& e : entries_) e.grad.fill(R(0));
  }

  int64_t trainable_params() const {
    int64_t n = 0;
    for (const auto& e : entries_)
      if (e.trainable) n += e.value->numel();
    return n;
  }

  int64_t total_params() const {
    int64_t n = 0;
    for (const auto& e : entries_) n += e.value->numel();
    return n;
  }

 private:
  std::vector<Entry> entries_;
};

}  // namespace sltnet

#endif  // SLTNET_PARAMS_HPP
