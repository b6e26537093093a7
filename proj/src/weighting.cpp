// ensdist/weighting.cpp

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

#include "ensdist/weighting.hpp"

#include <algorithm>
#include <cmath>

#include "ensdist/errors.hpp"
#include "ensdist/rational.hpp"

namespace ensdist {
namespace weighting {

WeightVector uniform_weights(int num_experts) {
  if (num_experts < 1) {
    throw InvalidArityError("uniform_weights: need at least one expert");
  }
  return WeightVector(static_cast<size_t>(num_experts),
                      1.0 / static_cast<double>(num_experts));
}

WeightVector best_expert_weights(const std::vector<double>& dev_wer_table) {
  if (dev_wer_table.empty()) {
    throw InvalidArityError("best_expert_weights: empty WER table");
  }
  size_t best = 0;
  for (size_t i = 1; i < dev_wer_table.size(); ++i) {
    if (dev_wer_table[i] < dev_wer_table[best]) best = i;
  }
  WeightVector w(dev_wer_table.size(), 0.0);
  w[best] = 1.0;
  return w;
}

WeightVector oracle_weights(const metrics::TokenSequence& ref,
                            const std::vector<metrics::TokenSequence>& hyps) {
  if (hyps.empty()) {
    throw InvalidArityError("oracle_weights: no hypotheses");
  }
  size_t best = 0;
  Rational best_wer = metrics::wer(ref, hyps[0]);
  for (size_t i = 1; i < hyps.size(); ++i) {
    Rational w = metrics::wer(ref, hyps[i]);
    if (w < best_wer) {
      best_wer = w;
      best = i;
    }
  }
  WeightVector w(hyps.size(), 0.0);
  w[best] = 1.0;
  return w;
}

WeightVector temperature_renormalize(const WeightVector& w,
                                     double temperature) {
  if (!(temperature > 0.0)) {
    throw ConfigError("temperature_renormalize: temperature must be > 0");
  }
  if (w.empty()) {
    throw InvalidArityError("temperature_renormalize: empty weight vector");
  }
  double max_scaled = w[0] / temperature;
  for (double wi : w) max_scaled = std::max(max_scaled, wi / temperature);
  WeightVector out(w.size());
  double denom = 0.0;
  for (size_t i = 0; i < w.size(); ++i) {
    out[i] = std::exp(w[i] / temperature - max_scaled);
    denom += out[i];
  }
  for (double& v : out) v /= denom;
  return out;
}

BceResult bce_loss(const WeightVector& w, const metrics::SupervisionTarget& z) {
  if (w.size() != z.size()) {
    throw InvalidArityError("bce_loss: weight/target length mismatch");
  }
  BceResult result;
  result.grad.resize(w.size());
  for (size_t i = 0; i < w.size(); ++i) {
    double wi = std::clamp(w[i], kBceEpsilon, 1.0 - kBceEpsilon);
    double zi = static_cast<double>(z[i]);
    result.loss -= zi * std::log(wi) + (1.0 - zi) * std::log(1.0 - wi);
    result.grad[i] = -zi / wi + (1.0 - zi) / (1.0 - wi);
  }
  return result;
}

}  // namespace weighting
}  // namespace ensdist
