// ensdist/confidence.cpp

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

#include "ensdist/confidence.hpp"

#include <cmath>

#include "ensdist/errors.hpp"

namespace ensdist {
namespace confidence {

std::vector<double> normalize_scores(const NBestList& nbest) {
  if (nbest.entries.empty()) {
    throw EmptyInputError("normalize_scores: empty n-best list");
  }
  double total = 0.0;
  for (const NBestEntry& e : nbest.entries) {
    if (!(e.score > 0.0)) {
      throw InvalidScoreError("normalize_scores: non-positive score in " +
                              nbest.utt_id);
    }
    total += e.score;
  }
  std::vector<double> p;
  p.reserve(nbest.entries.size());
  for (const NBestEntry& e : nbest.entries) p.push_back(e.score / total);
  return p;
}

double entropy(const NBestList& nbest) {
  std::vector<double> p = normalize_scores(nbest);
  double h = 0.0;
  for (double pi : p) {
    if (pi > 0.0) h -= pi * std::log(pi);
  }
  return h < 0.0 ? 0.0 : h;
}

}  // namespace confidence
}  // namespace ensdist
