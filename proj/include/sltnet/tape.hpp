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
#ifndef SLTNET_TAPE_HPP
#define SLTNET_TAPE_HPP

#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include "sltnet/tensor.hpp"

namespace sltnet {

// Handle to one output of a recorded operation.
struct Var {
  int32_t node = -1;
  int32_t slot = 0;
  bool valid() const { return node >= 0; }
};

// Reverse-mode tape. Single-threaded during a forward/backward pass; ops may
// parallelise internally. Recorded closures pull their output grads and push
// into their parents' grads; parameter leaves additionally flush into an
// external accumulation sink so grads persist across tapes until zeroed.
template <typename R>
class Tape {
 public:
  using TensorPtr = std::shared_ptr<Tensor<R>>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor<R> value) { return leaf(std::make_shared<Tensor<R>>(std::move(value))); }

  Var leaf(TensorPtr value) {
    Node n;
    n.vals.push_back(std::move(value));
    nodes_.push_back(std::move(n));
    return Var{static_cast<int32_t>(nodes_.size() - 1), 0};
  }

  // Parameter leaf: value is shared (not copied); grad flushes into *sink.
  Var param(TensorPtr value, Tensor<R>* sink) {
    Var v = leaf(std::move(value));
    nodes_[static_cast<size_t>(v.node)].sink = sink;
    return v;
  }

  // Records an op node. outputs are the produced tensors; backward receives the
  // tape and the node id and is responsible for propagating grads to parents.
  Var emit(std::vector<TensorPtr> outputs, std::function<void(Tape&, int)> backward) {
    Node n;
    n.vals = std::move(outputs);
    n.backward = std::move(backward);
    nodes_.push_back(std::move(n));
    return Var{static_cast<int32_t>(nodes_.size() - 1), 0};
  }

  Var out_of(int node, int slot) const {
    (void)this;
    return Var{node, slot};
  }

  const Tensor<R>& val(Var v) const { return *nodes_[idx(v)].vals[static_cast<size_t>(v.slot)]; }
  TensorPtr val_ptr(Var v) const { return nodes_[idx(v)].vals[static_cast<size_t>(v.slot)]; }

  // Grad accessor for backward closures; allocates zeros on first touch.
  Tensor<R>& grad_acc(Var v) {
    Node& n = nodes_[idx(v)];
    ensure_grad_slots(n);
    auto& g = n.grads[static_cast<size_t>(v.slot)];
    if (!g) g = std::make_shared<Tensor<R>>(n.vals[static_cast<size_t>(v.slot)]->shape);
    return *g;
  }

  // Null when no grad reached this var during the last backward.
  const Tensor<R>* grad_of(Var v) const {
    const Node& n = nodes_[idx(v)];
    if (n.grads.empty()) return nullptr;
    const auto& g = n.grads[static_cast<size_t>(v.slot)];
    return g ? g.get() : nullptr;
  }

  bool has_grad(Var v) const { return grad_of(v) != nullptr; }

  // Seeds d(loss)/d(loss)=1 and walks the tape in reverse. Internal grads are
  // reset per call; parameter sinks accumulate (+=) across calls.
  void backward(Var loss) {
    if (nodes_.empty()) throw StateError("backward: tape is empty (no forward recorded)");
    if (!loss.valid() || idx(loss) >= nodes_.size())
      throw StateError("backward: loss is not a variable of this tape");
    if (val(loss).numel() != 1) throw ArgumentError("backward: loss must be scalar");

    for (auto& n : nodes_) n.grads.clear();
    grad_acc(loss)[0] = R(1);

    for (size_t i = nodes_.size(); i-- > 0;) {
      Node& n = nodes_[i];
      if (n.grads.empty()) continue;  // nothing reached this node
      bool any = false;
      for (auto& g : n.grads)
        if (g) any = true;
      if (!any) continue;
      if (n.backward) n.backward(*this, static_cast<int>(i));
      if (n.sink) {
        const auto& g = n.grads[0];
        if (g) {
          Tensor<R>& dst = *n.sink;
          if (dst.v.empty()) dst = Tensor<R>(g->shape);
          check_same_shape(dst, *g, "param grad sink");
          for (size_t j = 0; j < dst.v.size(); ++j) dst.v[j] += g->v[j];
        }
      }
    }
  }

  size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    std::vector<TensorPtr> vals;
    std::vector<TensorPtr> grads;
    std::function<void(Tape&, int)> backward;
    Tensor<R>* sink = nullptr;
  };

  size_t idx(Var v) const {
    if (!v.valid()) throw StateError("invalid tape variable");
    return static_cast<size_t>(v.node);
  }

  void ensure_grad_slots(Node& n) {
    if (n.grads.size() != n.vals.size()) n.grads.resize(n.vals.size());
  }

  std::vector<Node> nodes_;
};

}  // namespace sltnet

#endif  // SLTNET_TAPE_HPP
