// ensdist/metrics.cpp

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

#include "ensdist/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <limits>

#include "ensdist/errors.hpp"

namespace ensdist {
namespace metrics {

TokenSequence tokenize(std::string_view text) {
  TokenSequence tokens;
  std::string current;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!current.empty()) {
        tokens.push_back(std::move(current));
        current.clear();
      }
    } else {
      current.push_back(static_cast<char>(
          std::tolower(static_cast<unsigned char>(c))));
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

EditAlignment align(const TokenSequence& ref, const TokenSequence& hyp) {
  const int n = static_cast<int>(ref.size());
  const int m = static_cast<int>(hyp.size());
  // dp[i][j] = min cost aligning ref[0..i) with hyp[0..j)
  std::vector<std::vector<int>> dp(n + 1, std::vector<int>(m + 1, 0));
  for (int i = 1; i <= n; ++i) dp[i][0] = i;
  for (int j = 1; j <= m; ++j) dp[0][j] = j;
  for (int i = 1; i <= n; ++i) {
    for (int j = 1; j <= m; ++j) {
      int diag = dp[i - 1][j - 1] + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      int del = dp[i - 1][j] + 1;
      int ins = dp[i][j - 1] + 1;
      dp[i][j] = std::min({diag, del, ins});
    }
  }

  // Backtrace, preferring Match > Substitute > Delete > Insert on ties.
  EditAlignment out;
  int i = n, j = m;
  std::vector<EditOp> rev;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 && ref[i - 1] == hyp[j - 1] &&
        dp[i][j] == dp[i - 1][j - 1]) {
      rev.push_back({EditOpKind::kMatch, i - 1, j - 1});
      --i;
      --j;
    } else if (i > 0 && j > 0 && ref[i - 1] != hyp[j - 1] &&
               dp[i][j] == dp[i - 1][j - 1] + 1) {
      rev.push_back({EditOpKind::kSubstitute, i - 1, j - 1});
      --i;
      --j;
    } else if (i > 0 && dp[i][j] == dp[i - 1][j] + 1) {
      rev.push_back({EditOpKind::kDelete, i - 1, -1});
      --i;
    } else {
      rev.push_back({EditOpKind::kInsert, -1, j - 1});
      --j;
    }
  }
  out.ops.assign(rev.rbegin(), rev.rend());
  for (const EditOp& op : out.ops) {
    switch (op.kind) {
      case EditOpKind::kMatch: ++out.matches; break;
      case EditOpKind::kSubstitute: ++out.substitutions; break;
      case EditOpKind::kDelete: ++out.deletions; break;
      case EditOpKind::kInsert: ++out.insertions; break;
    }
  }
  return out;
}

Rational wer(const TokenSequence& ref, const TokenSequence& hyp) {
  if (ref.empty()) {
    if (hyp.empty()) return Rational(0, 1);
    throw UndefinedWerError("wer: empty reference with non-empty hypothesis");
  }
  EditAlignment a = align(ref, hyp);
  return Rational(a.cost(), static_cast<int64_t>(ref.size()));
}

SupervisionTarget best_expert_labels(const TokenSequence& ref,
                                     const std::vector<TokenSequence>& hyps) {
  if (hyps.size() < 2) {
    throw InvalidArityError("best_expert_labels: need at least 2 experts");
  }
  std::vector<Rational> wers;
  wers.reserve(hyps.size());
  for (const TokenSequence& h : hyps) wers.push_back(wer(ref, h));
  Rational best = wers[0];
  for (const Rational& w : wers) {
    if (w < best) best = w;
  }
  SupervisionTarget z(hyps.size(), 0);
  for (size_t i = 0; i < wers.size(); ++i) {
    if (wers[i] == best) z[i] = 1;
  }
  return z;
}

namespace {

size_t argmax_lowest_index(const std::vector<double>& w) {
  size_t best = 0;
  for (size_t i = 1; i < w.size(); ++i) {
    if (w[i] > w[best]) best = i;
  }
  return best;
}

}  // namespace

double weighter_accuracy(const std::vector<std::vector<double>>& predictions,
                         const std::vector<TokenSequence>& refs,
                         const std::vector<std::vector<TokenSequence>>& hyps) {
  if (predictions.size() != refs.size() || refs.size() != hyps.size()) {
    throw InvalidArityError("weighter_accuracy: list length mismatch");
  }
  if (predictions.empty()) {
    throw EmptySetError("weighter_accuracy: empty evaluation set");
  }
  int hits = 0;
  for (size_t u = 0; u < predictions.size(); ++u) {
    SupervisionTarget z = best_expert_labels(refs[u], hyps[u]);
    if (predictions[u].size() != z.size()) {
      throw InvalidArityError("weighter_accuracy: weight/expert count mismatch");
    }
    if (z[argmax_lowest_index(predictions[u])] == 1) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(predictions.size());
}

double weighted_wer(const std::vector<double>& weights,
                    const TokenSequence& ref,
                    const std::vector<TokenSequence>& hyps) {
  if (weights.size() != hyps.size()) {
    throw InvalidArityError("weighted_wer: weight/hypothesis count mismatch");
  }
  double acc = 0.0;
  for (size_t i = 0; i < weights.size(); ++i) {
    acc += weights[i] * wer(ref, hyps[i]).to_double();
  }
  return acc;
}

}  // namespace metrics
}  // namespace ensdist
