// ensdist/fusion.hpp

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

#ifndef ENSDIST_FUSION_HPP_
#define ENSDIST_FUSION_HPP_

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ensdist/metrics.hpp"

namespace ensdist {
namespace fusion {

using metrics::TokenSequence;

// Distinguished absence marker inside a slot. tokenize() never produces empty
// tokens, so the empty string is free for this role.
inline const std::string kNullToken;

struct SlotEntry {
  int count = 0;
  double confidence_sum = 0.0;
};

// One aligned position of the word transition network. Candidate counts
// always sum to the number of combined hypotheses.
struct Slot {
  std::map<std::string, SlotEntry> candidates;

  bool contains(const std::string& token) const {
    return candidates.find(token) != candidates.end();
  }
};

struct WordTransitionNetwork {
  std::vector<Slot> slots;
  int num_hypotheses = 0;
};

struct VotingScheme {
  enum class Kind { kFrequency, kConfidence };
  Kind kind = Kind::kFrequency;
  // score(candidate) = alpha * count/N + (1 - alpha) * mean confidence.
  // Frequency is Confidence with alpha = 1.
  double alpha = 1.0;

  static VotingScheme frequency() { return {Kind::kFrequency, 1.0}; }
  static VotingScheme confidence(double alpha) {
    return {Kind::kConfidence, alpha};
  }
  double effective_alpha() const {
    return kind == Kind::kFrequency ? 1.0 : alpha;
  }
};

// Iteratively aligns each hypothesis against the running network with
// NULL-aware costs: a token vs a slot costs 0 if the slot already holds it,
// else 1; an inserted token opens a fresh slot carrying NULL for all prior
// hypotheses. Combination order is the input order.
//
// `confidences`, when present, gives one utterance-level confidence per
// hypothesis, replicated per token; NULL entries inherit the confidence of
// the hypothesis that skipped the slot.
WordTransitionNetwork build_wtn(
    const std::vector<TokenSequence>& hyps,
    const std::vector<double>* confidences = nullptr);

// Per-slot argmax under the scheme. NULL winners are omitted; NULL loses all
// ties and token ties break lexicographically.
TokenSequence vote(const WordTransitionNetwork& wtn, const VotingScheme& scheme);

TokenSequence rover(const std::vector<TokenSequence>& hyps,
                    const VotingScheme& scheme,
                    const std::vector<double>* confidences = nullptr);

}  // namespace fusion
}  // namespace ensdist

#endif  // ENSDIST_FUSION_HPP_
