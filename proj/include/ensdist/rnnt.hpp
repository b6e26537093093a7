// ensdist/rnnt.hpp

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

#ifndef ENSDIST_RNNT_HPP_
#define ENSDIST_RNNT_HPP_

#include <vector>

#include "ensdist/tensor.hpp"
#include "ensdist/transducer.hpp"

namespace ensdist {
namespace rnnt {

using nn::LogitLattice;

// -log P(targets | lattice), marginalized over all monotonic alignments:
// blank advances time, the next label advances the target position, and a
// final blank from (T-1, U) terminates the path. Log-space forward pass with
// max-subtracted log-sum-exp throughout.
//
// Targets are ids in 1..V. U = 0 (empty supervision) is valid: the all-blank
// path. Throws InvalidLatticeError when T = 0.
double rnnt_loss(const LogitLattice& lattice, const std::vector<int>& targets);

struct LossAndGrad {
  double loss = 0.0;
  // dL/dlogits, same layout as LogitLattice::logits.
  std::vector<double> grad;
  // dL/d(per-cell log-probabilities), same layout: the negated transition
  // occupancies. Never positive, which is the monotone-teaching-signal
  // guarantee (the logit-level gradient has no such sign because the
  // softmax couples symbols within a cell).
  std::vector<double> grad_log_probs;
};

// Alpha-beta occupancy gradient composed with the log-softmax Jacobian.
LossAndGrad rnnt_loss_and_grad(const LogitLattice& lattice,
                               const std::vector<int>& targets);

inline std::vector<double> rnnt_grad(const LogitLattice& lattice,
                                     const std::vector<int>& targets) {
  return rnnt_loss_and_grad(lattice, targets).grad;
}

// Forward and backward lattice totals; they agree within tight tolerance and
// the pair feeds the consistency tests.
struct AlphaBeta {
  std::vector<double> alpha;  // (T x U+1), log space
  std::vector<double> beta;
  double forward_total = 0.0;
  double backward_total = 0.0;
};

AlphaBeta rnnt_alpha_beta(const LogitLattice& lattice,
                          const std::vector<int>& targets);

struct MultiTeacherLoss {
  double total = 0.0;                // sum_i w[i] * loss[i]
  std::vector<double> per_teacher;   // individual RNN-T losses
};

// L = sum_i w[i] * L_rnnt(x, t_i) for one utterance. The encoder runs once
// and is shared by the K per-teacher lattices; the per-teacher work can fan
// out to `threads` workers. Gradients reduce in teacher index order no
// matter the thread count, so results are bit-identical for any `threads`.
MultiTeacherLoss weighted_multi_teacher_loss(
    nn::TransducerModel& model, const nn::Tensor& features,
    const std::vector<std::vector<int>>& teacher_tokens,
    const std::vector<double>& weights, bool train, int threads = 1);

}  // namespace rnnt
}  // namespace ensdist

#endif  // ENSDIST_RNNT_HPP_
