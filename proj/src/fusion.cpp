// ensdist/fusion.cpp

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

#include "ensdist/fusion.hpp"

#include <algorithm>

#include "ensdist/errors.hpp"

namespace ensdist {
namespace fusion {

namespace {

void add_candidate(Slot& slot, const std::string& token, double confidence) {
  SlotEntry& e = slot.candidates[token];
  e.count += 1;
  e.confidence_sum += confidence;
}

// Aligns one hypothesis into the network. DP over (existing slots) x (hyp
// tokens); backtrace ties resolve slot-match > slot-substitute > skip-slot >
// new-slot, mirroring the Match > Sub > Del > Ins order of metrics::align.
// `null_carry` is the mean confidence of the prior hypotheses, used for the
// NULL entries of freshly inserted slots.
void merge_hypothesis(WordTransitionNetwork& wtn, const TokenSequence& hyp,
                      double confidence, double null_carry) {
  const int n = static_cast<int>(wtn.slots.size());
  const int m = static_cast<int>(hyp.size());
  const int prior = wtn.num_hypotheses;

  auto diag_cost = [&](int i, int j) {
    return wtn.slots[i].contains(hyp[j]) ? 0 : 1;
  };
  auto skip_cost = [&](int i) {
    // The hypothesis asserts absence here; free only if NULL is already a
    // candidate of the slot.
    return wtn.slots[i].contains(kNullToken) ? 0 : 1;
  };

  std::vector<std::vector<int>> dp(n + 1, std::vector<int>(m + 1, 0));
  for (int i = 1; i <= n; ++i) dp[i][0] = dp[i - 1][0] + skip_cost(i - 1);
  for (int j = 1; j <= m; ++j) dp[0][j] = j;
  for (int i = 1; i <= n; ++i) {
    for (int j = 1; j <= m; ++j) {
      dp[i][j] = std::min({dp[i - 1][j - 1] + diag_cost(i - 1, j - 1),
                           dp[i - 1][j] + skip_cost(i - 1),
                           dp[i][j - 1] + 1});
    }
  }

  enum class Move { kAlign, kSkip, kNew };
  std::vector<std::pair<Move, int>> rev;  // (move, hyp index or -1)
  int i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 && dp[i][j] == dp[i - 1][j - 1] + diag_cost(i - 1, j - 1)) {
      rev.push_back({Move::kAlign, j - 1});
      --i;
      --j;
    } else if (i > 0 && dp[i][j] == dp[i - 1][j] + skip_cost(i - 1)) {
      rev.push_back({Move::kSkip, -1});
      --i;
    } else {
      rev.push_back({Move::kNew, j - 1});
      --j;
    }
  }

  std::vector<Slot> merged;
  merged.reserve(static_cast<size_t>(n + m));
  int slot_idx = 0;
  for (auto it = rev.rbegin(); it != rev.rend(); ++it) {
    switch (it->first) {
      case Move::kAlign: {
        Slot s = wtn.slots[slot_idx++];
        add_candidate(s, hyp[it->second], confidence);
        merged.push_back(std::move(s));
        break;
      }
      case Move::kSkip: {
        Slot s = wtn.slots[slot_idx++];
        add_candidate(s, kNullToken, confidence);
        merged.push_back(std::move(s));
        break;
      }
      case Move::kNew: {
        Slot s;
        if (prior > 0) {
          SlotEntry& e = s.candidates[kNullToken];
          e.count = prior;
          // Prior hypotheses implicitly asserted absence at the fresh slot;
          // their individual confidences are gone by now, so the running
          // mean stands in for them.
          e.confidence_sum = null_carry * prior;
        }
        add_candidate(s, hyp[it->second], confidence);
        merged.push_back(std::move(s));
        break;
      }
    }
  }
  wtn.slots = std::move(merged);
  wtn.num_hypotheses += 1;
}

}  // namespace

WordTransitionNetwork build_wtn(const std::vector<TokenSequence>& hyps,
                                const std::vector<double>* confidences) {
  if (hyps.empty()) {
    throw EmptyInputError("build_wtn: no hypotheses to combine");
  }
  if (confidences != nullptr && confidences->size() != hyps.size()) {
    throw InvalidArityError("build_wtn: confidence/hypothesis count mismatch");
  }
  WordTransitionNetwork wtn;
  double conf_sum = 0.0;
  for (size_t k = 0; k < hyps.size(); ++k) {
    double conf = confidences != nullptr ? (*confidences)[k] : 0.0;
    double null_carry = k > 0 ? conf_sum / static_cast<double>(k) : 0.0;
    merge_hypothesis(wtn, hyps[k], conf, null_carry);
    conf_sum += conf;
  }
  return wtn;
}

TokenSequence vote(const WordTransitionNetwork& wtn,
                   const VotingScheme& scheme) {
  const double alpha = scheme.effective_alpha();
  const double n = static_cast<double>(wtn.num_hypotheses);
  TokenSequence out;
  for (const Slot& slot : wtn.slots) {
    const std::string* winner = nullptr;
    double best_score = 0.0;
    // std::map iterates in lexicographic order with NULL ("") first, so a
    // strict > comparison implements both tie rules at once.
    for (const auto& [token, entry] : slot.candidates) {
      double mean_conf = entry.count > 0
                             ? entry.confidence_sum / entry.count
                             : 0.0;
      double score = alpha * (entry.count / n) + (1.0 - alpha) * mean_conf;
      if (winner == nullptr || score > best_score ||
          (score == best_score && *winner == kNullToken)) {
        winner = &token;
        best_score = score;
      }
    }
    if (winner != nullptr && *winner != kNullToken) out.push_back(*winner);
  }
  return out;
}

TokenSequence rover(const std::vector<TokenSequence>& hyps,
                    const VotingScheme& scheme,
                    const std::vector<double>* confidences) {
  return vote(build_wtn(hyps, confidences), scheme);
}

}  // namespace fusion
}  // namespace ensdist
