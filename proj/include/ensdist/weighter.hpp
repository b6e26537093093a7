// ensdist/weighter.hpp

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

#ifndef ENSDIST_WEIGHTER_HPP_
#define ENSDIST_WEIGHTER_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "ensdist/layers.hpp"
#include "ensdist/metrics.hpp"
#include "ensdist/params.hpp"
#include "ensdist/tape.hpp"
#include "ensdist/weighting.hpp"

namespace ensdist {
namespace nn {

struct WeighterConfig {
  int feature_dim = 16;
  int num_experts = 3;
  int vocab_size = 24;
  int hidden = 64;     // audio and transcript encoder width
  int embed_dim = 32;  // token embeddings
  int attention_heads = 2;
  int head_hidden = 64;
  bool use_entropy = false;

  // How the cross-attended transcript states are pooled before the scoring
  // head: per-expert segment means scored by a shared head, or one global
  // mean feeding a K-way head.
  enum class Pooling { kSegmentMean, kGlobalMean };
  Pooling pooling = Pooling::kSegmentMean;
};

// Gate network over experts: an LSTM audio encoder, token-embedded expert
// transcripts joined by separator embeddings and encoded by an LSTM,
// multi-head cross-attention from transcript states onto audio states, mean
// pooling, and a ReLU feed-forward head (optionally fed per-expert n-best
// entropies) ending in a softmax over the K experts.
class WeighterModel {
 public:
  WeighterModel(WeighterConfig cfg, std::vector<std::string> vocab,
                uint64_t seed);

  const WeighterConfig& config() const { return cfg_; }
  const std::vector<std::string>& vocab() const { return vocab_; }
  uint64_t seed() const { return seed_; }
  int64_t step() const { return step_; }
  void set_step(int64_t s) { step_ = s; }

  ParameterStore& params() { return params_; }
  const ParameterStore& params() const { return params_; }

  int separator_id() const { return cfg_.vocab_size + 1; }
  int token_id(const std::string& token) const;
  std::vector<int> to_ids(const metrics::TokenSequence& tokens) const;

  std::vector<int> bind(Tape& tape, bool trainable) const;

  // Simplex output node (1 x K). `entropy_features` must be present iff the
  // model was configured with use_entropy.
  int forward(Tape& tape, const std::vector<int>& bound,
              const Tensor& features,
              const std::vector<std::vector<int>>& transcripts,
              const std::vector<double>* entropy_features) const;

  // Numeric convenience on a private no-grad tape.
  weighting::WeightVector forward_numeric(
      const Tensor& features,
      const std::vector<std::vector<int>>& transcripts,
      const std::vector<double>* entropy_features) const;

  void accumulate_grads(const Tape& tape, const std::vector<int>& bound);

 private:
  WeighterConfig cfg_;
  std::vector<std::string> vocab_;
  uint64_t seed_ = 0;
  int64_t step_ = 0;
  ParameterStore params_;

  struct LstmIdx {
    size_t wx, wh, b;
  };
  LstmIdx audio_;
  size_t emb_ = 0;
  LstmIdx text_;
  size_t wq_ = 0, wk_ = 0, wv_ = 0, wo_ = 0;
  size_t head_w1_ = 0, head_b1_ = 0, head_w2_ = 0, head_b2_ = 0;
};

}  // namespace nn
}  // namespace ensdist

#endif  // ENSDIST_WEIGHTER_HPP_
