// ensdist/decode.hpp

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

#ifndef ENSDIST_DECODE_HPP_
#define ENSDIST_DECODE_HPP_

#include <vector>

#include "ensdist/tensor.hpp"
#include "ensdist/transducer.hpp"

namespace ensdist {
namespace nn {

struct DecodeConfig {
  // Emission cap per frame; guarantees the greedy loop terminates.
  int max_emits_per_frame = 5;
  int beam_width = 16;
};

// Standard transducer greedy loop: argmax per step, blank advances time,
// non-blank emits and advances the predictor, at most max_emits_per_frame
// emissions before the frame is forcibly advanced. Returns token ids.
std::vector<int> greedy_decode(const TransducerModel& model,
                               const Tensor& features,
                               const DecodeConfig& cfg = {});

struct Hypothesis {
  std::vector<int> tokens;
  double log_prob = 0.0;  // merged over paths with this label history
  double score = 0.0;     // exp(log_prob / max(1, #tokens)), always positive
};

// Time-synchronous beam search with merging of equal label histories.
// Returns up to n complete hypotheses sorted by descending score.
std::vector<Hypothesis> nbest_decode(const TransducerModel& model,
                                     const Tensor& features, int n,
                                     const DecodeConfig& cfg = {});

}  // namespace nn
}  // namespace ensdist

#endif  // ENSDIST_DECODE_HPP_
