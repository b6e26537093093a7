// ensdist/metrics.hpp

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

#ifndef ENSDIST_METRICS_HPP_
#define ENSDIST_METRICS_HPP_

#include <string>
#include <string_view>
#include <vector>

#include "ensdist/rational.hpp"

namespace ensdist {
namespace metrics {

// Word-level tokens. Never contains empty strings; may itself be empty.
using TokenSequence = std::vector<std::string>;

enum class EditOpKind { kMatch, kSubstitute, kInsert, kDelete };

struct EditOp {
  EditOpKind kind;
  int ref_index;  // -1 for insertions
  int hyp_index;  // -1 for deletions
};

struct EditAlignment {
  std::vector<EditOp> ops;
  int substitutions = 0;
  int deletions = 0;
  int insertions = 0;
  int matches = 0;

  int cost() const { return substitutions + deletions + insertions; }
};

// Per-utterance binary supervision target: z[i] = 1 iff expert i attains the
// minimum WER (all ties marked).
using SupervisionTarget = std::vector<int>;

// Lowercases and splits on runs of whitespace. Total function; empty or
// whitespace-only input yields an empty sequence.
TokenSequence tokenize(std::string_view text);

// Minimum-cost Levenshtein alignment with unit costs. Backtrace ties resolve
// Match > Substitute > Delete > Insert so alignments are deterministic.
EditAlignment align(const TokenSequence& ref, const TokenSequence& hyp);

// (S + D + I) / |ref|, exact. Throws UndefinedWerError for an empty reference
// against a non-empty hypothesis; empty vs empty is 0.
Rational wer(const TokenSequence& ref, const TokenSequence& hyp);

// z[i] = 1 for every expert attaining the minimum WER against ref.
SupervisionTarget best_expert_labels(const TokenSequence& ref,
                                     const std::vector<TokenSequence>& hyps);

// Fraction of utterances where argmax_i w[i] (ties -> lowest index) lands on
// an expert with z[i] = 1. Throws EmptySetError for an empty evaluation set.
double weighter_accuracy(const std::vector<std::vector<double>>& predictions,
                         const std::vector<TokenSequence>& refs,
                         const std::vector<std::vector<TokenSequence>>& hyps);

// sum_i w[i] * WER(ref, hyps[i]).
double weighted_wer(const std::vector<double>& weights,
                    const TokenSequence& ref,
                    const std::vector<TokenSequence>& hyps);

}  // namespace metrics
}  // namespace ensdist

#endif  // ENSDIST_METRICS_HPP_
