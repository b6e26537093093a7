// ensdist/weighting.hpp

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

#ifndef ENSDIST_WEIGHTING_HPP_
#define ENSDIST_WEIGHTING_HPP_

#include <vector>

#include "ensdist/metrics.hpp"

namespace ensdist {
namespace weighting {

// Per-utterance expert weights on the probability simplex.
using WeightVector = std::vector<double>;

// Clamp applied to weights before logs in the BCE loss.
inline constexpr double kBceEpsilon = 1e-7;

// (1/K, ..., 1/K): the All-Experts policy. Throws InvalidArityError for K<1.
WeightVector uniform_weights(int num_experts);

// One-hot on the expert with the lowest validation WER; ties -> lowest index.
WeightVector best_expert_weights(const std::vector<double>& dev_wer_table);

// One-hot on the first expert attaining minimal WER against the reference.
WeightVector oracle_weights(const metrics::TokenSequence& ref,
                            const std::vector<metrics::TokenSequence>& hyps);

// w_hat[i] = exp(w[i]/T) / sum_j exp(w[j]/T), computed with max subtraction.
// Flattens the low-entropy gate output before loss mixing. Requires T > 0.
WeightVector temperature_renormalize(const WeightVector& w, double temperature);

struct BceResult {
  double loss = 0.0;
  std::vector<double> grad;  // dL/dw, evaluated on the clamped weights
};

// L = -sum_i [z_i ln w_i + (1 - z_i) ln(1 - w_i)], summed over experts, with
// w clamped to [kBceEpsilon, 1 - kBceEpsilon] first.
BceResult bce_loss(const WeightVector& w, const metrics::SupervisionTarget& z);

}  // namespace weighting
}  // namespace ensdist

#endif  // ENSDIST_WEIGHTING_HPP_
