// ensdist/transducer.hpp

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

#ifndef ENSDIST_TRANSDUCER_HPP_
#define ENSDIST_TRANSDUCER_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "ensdist/layers.hpp"
#include "ensdist/metrics.hpp"
#include "ensdist/params.hpp"
#include "ensdist/tape.hpp"
#include "ensdist/tensor.hpp"

namespace ensdist {
namespace nn {

// Joint-network output over (time x label-position x vocab+blank).
// Index 0 of the symbol axis is the blank.
struct LogitLattice {
  int time_steps = 0;   // T
  int target_len = 0;   // U
  int vocab_size = 0;   // V; symbol axis has V+1 entries
  std::vector<double> logits;  // row-major [t][u][k]

  LogitLattice() = default;
  LogitLattice(int t, int u, int v)
      : time_steps(t),
        target_len(u),
        vocab_size(v),
        logits(static_cast<size_t>(t) * (u + 1) * (v + 1), 0.0) {}

  int symbols() const { return vocab_size + 1; }
  double& at(int t, int u, int k) {
    return logits[(static_cast<size_t>(t) * (target_len + 1) + u) * symbols() +
                  k];
  }
  double at(int t, int u, int k) const {
    return logits[(static_cast<size_t>(t) * (target_len + 1) + u) * symbols() +
                  k];
  }
};

struct TransducerConfig {
  int feature_dim = 16;
  int vocab_size = 24;  // V; blank is index 0, real tokens 1..V
  int encoder_layers = 2;
  int hidden = 64;
  int predictor_layers = 1;
  int embed_dim = 32;
  int joiner_hidden = 64;
};

// Desk-scale transducer: stacked unidirectional LSTM encoder, LSTM
// prediction network over token prefixes, and a tanh feed-forward joint
// network producing logits over V+1 symbols.
class TransducerModel {
 public:
  TransducerModel(TransducerConfig cfg, std::vector<std::string> vocab,
                  uint64_t seed);

  const TransducerConfig& config() const { return cfg_; }
  const std::vector<std::string>& vocab() const { return vocab_; }
  uint64_t seed() const { return seed_; }
  int64_t step() const { return step_; }
  void set_step(int64_t s) { step_ = s; }

  ParameterStore& params() { return params_; }
  const ParameterStore& params() const { return params_; }

  // Token <-> id mapping; ids are 1..V. Throws VocabError on unknown tokens.
  int token_id(const std::string& token) const;
  std::vector<int> to_ids(const metrics::TokenSequence& tokens) const;
  metrics::TokenSequence to_tokens(const std::vector<int>& ids) const;

  // Param leaf ids on a tape, in ParameterStore order.
  std::vector<int> bind(Tape& tape, bool trainable) const;

  // (T x H) encoder states. Encoder output depends only on the features, so
  // one encode() is shared across the per-teacher lattices of an utterance.
  int encode(Tape& tape, const std::vector<int>& bound,
             const Tensor& features) const;

  // (U+1 x H) prediction-network states over [start, y_1, ..., y_U].
  int predict(Tape& tape, const std::vector<int>& bound,
              const std::vector<int>& tokens) const;

  // T lattice slabs of shape (U+1 x V+1).
  std::vector<int> joint(Tape& tape, const std::vector<int>& bound,
                         int encoded, int predicted) const;

  // Stepwise primitives for the decoders.
  LstmState predictor_start(Tape& tape, const std::vector<int>& bound) const;
  // Advances the predictor state by one emitted token id.
  LstmState predictor_step(Tape& tape, const std::vector<int>& bound,
                           LstmState state, int token_id) const;
  // Joint logits (1 x V+1) for one (encoder frame, predictor state) pair.
  int joint_step(Tape& tape, const std::vector<int>& bound, int enc_frame,
                 int pred_state_h) const;

  // Adds the tape gradients of the bound leaves into params().grad.
  void accumulate_grads(const Tape& tape, const std::vector<int>& bound);

 private:
  struct LstmIdx {
    size_t wx, wh, b;
  };
  LstmNodeIds lstm_nodes(const std::vector<int>& bound,
                         const LstmIdx& idx) const {
    return {bound[idx.wx], bound[idx.wh], bound[idx.b]};
  }

  TransducerConfig cfg_;
  std::vector<std::string> vocab_;
  uint64_t seed_ = 0;
  int64_t step_ = 0;
  ParameterStore params_;

  std::vector<LstmIdx> enc_layers_;
  size_t emb_ = 0;
  std::vector<LstmIdx> pred_layers_;
  size_t join_enc_ = 0, join_pred_ = 0, join_b_ = 0;
  size_t join_out_ = 0, join_out_b_ = 0;
};

// Full lattice in one call on a throwaway no-grad tape; the training path
// uses the graph-building methods directly.
LogitLattice student_forward(const TransducerModel& model,
                             const Tensor& features,
                             const std::vector<int>& tokens);

// Copies T tape slabs into a numeric lattice.
LogitLattice lattice_from_tape(const Tape& tape,
                               const std::vector<int>& slabs);

}  // namespace nn
}  // namespace ensdist

#endif  // ENSDIST_TRANSDUCER_HPP_
