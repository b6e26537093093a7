// ensdist/tape.hpp

// Copyright 2026 The ensdist Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef ENSDIST_TAPE_HPP_
#define ENSDIST_TAPE_HPP_

#include <functional>
#include <utility>
#include <vector>

#include "ensdist/tensor.hpp"

namespace ensdist {
namespace nn {

// Reverse-mode differentiable-array tape. Nodes form an append-only DAG (a
// node's inputs always have smaller ids), so one reverse sweep over ids
// visits each node exactly once in reverse topological order.
//
// With grad disabled the same ops run as plain eager math, which is what the
// decoders use.
class Tape {
 public:
  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;

  bool grad_enabled() const { return grad_enabled_; }
  int size() const { return static_cast<int>(nodes_.size()); }

  const Tensor& value(int id) const { return nodes_[id].value; }
  // Empty tensor if the node received no gradient.
  const Tensor& grad(int id) const { return nodes_[id].grad; }
  bool requires_grad(int id) const { return nodes_[id].requires_grad; }

  int leaf(Tensor value, bool requires_grad = false);

  // ---- primitives ----
  // add: same shape, or b a broadcast row (1 x cols) or scalar (1 x 1)
  int add(int a, int b);
  int sub(int a, int b);
  // mul: elementwise same shape, or b scalar (1 x 1)
  int mul(int a, int b);
  int matmul(int a, int b);
  int transpose(int a);
  int scale(int a, double factor);
  int tanh_op(int a);
  int sigmoid_op(int a);
  int relu_op(int a);
  int softmax_rows(int a);
  int log_softmax_rows(int a);
  int slice_cols(int a, int c0, int c1);
  int slice_rows(int a, int r0, int r1);
  int row(int a, int r) { return slice_rows(a, r, r + 1); }
  int concat_rows(const std::vector<int>& parts);
  int concat_cols(const std::vector<int>& parts);
  int mean_rows(int a);
  // Gathers rows of `table` by index; backward scatter-adds.
  int embedding(int table, const std::vector<int>& ids);

  // Fused recurrent cell step. zx is the precomputed input projection
  // x*Wx (1 x 4H); wh is (H x 4H), b is (1 x 4H); gate order [i, f, g, o].
  // The output packs the new state as a (2 x H) tensor: row 0 the hidden
  // state, row 1 the cell state. Fusing keeps the tape at one node per
  // step, which dominates training throughput at this scale.
  int lstm_cell(int zx, int h, int c, int wh, int b, int hidden);

  // Seeds dL/dnode for one or more roots, then runs the reverse sweep.
  // Gradients accumulate across calls until reset_gradients().
  void backward(int root, Tensor seed);
  void backward(std::vector<std::pair<int, Tensor>> seeds);

  void reset_gradients();

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    std::function<void(Tape&)> backward;
  };

  int push(Tensor value, bool requires_grad,
           std::function<void(Tape&)> backward_fn);
  Tensor& grad_ref(int id);  // allocates zeros on first touch
  void add_grad(int id, const Tensor& g);
  void run_backward_from(int highest);

  std::vector<Node> nodes_;
  bool grad_enabled_;
  // Id of the node whose backward closure is currently running; lets the
  // closures find their own output without capturing it at build time.
  int current_node_ = -1;
};

}  // namespace nn
}  // namespace ensdist

#endif  // ENSDIST_TAPE_HPP_
