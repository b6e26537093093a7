// ensdist/confidence.hpp

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

#ifndef ENSDIST_CONFIDENCE_HPP_
#define ENSDIST_CONFIDENCE_HPP_

#include <string>
#include <vector>

#include "ensdist/metrics.hpp"

namespace ensdist {
namespace confidence {

struct NBestEntry {
  metrics::TokenSequence text;
  double score = 0.0;  // strictly positive
};

// Decoder n-best output for one utterance from one expert, entries sorted by
// descending score. Scores must be positive: decoders that emit
// log-probabilities exponentiate before writing n-best files.
struct NBestList {
  std::string utt_id;
  std::string expert_id;
  std::vector<NBestEntry> entries;
};

// p[i] = s[i] / sum_j s[j]. Throws InvalidScoreError on any non-positive
// score.
std::vector<double> normalize_scores(const NBestList& nbest);

// H = -sum_i p[i] ln p[i] in nats, with 0 ln 0 := 0. Bounded by ln(#entries).
double entropy(const NBestList& nbest);

}  // namespace confidence
}  // namespace ensdist

#endif  // ENSDIST_CONFIDENCE_HPP_
