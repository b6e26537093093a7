// ensdist/decode.cpp

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

#include "ensdist/decode.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "ensdist/layers.hpp"

namespace ensdist {
namespace nn {

namespace {

double log_sum_exp(double a, double b) {
  double m = std::max(a, b);
  if (m == -std::numeric_limits<double>::infinity()) return m;
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

std::vector<double> log_softmax_row(const Tensor& logits) {
  std::vector<double> lp(logits.data.begin(), logits.data.end());
  double mx = *std::max_element(lp.begin(), lp.end());
  double denom = 0.0;
  for (double v : lp) denom += std::exp(v - mx);
  double lse = mx + std::log(denom);
  for (double& v : lp) v -= lse;
  return lp;
}

}  // namespace

std::vector<int> greedy_decode(const TransducerModel& model,
                               const Tensor& features,
                               const DecodeConfig& cfg) {
  Tape tape(/*grad_enabled=*/false);
  std::vector<int> bound = model.bind(tape, false);
  int enc = model.encode(tape, bound, features);
  const int frames = tape.value(enc).rows;

  LstmState state = model.predictor_start(tape, bound);
  std::vector<int> tokens;
  int t = 0;
  int emits = 0;
  while (t < frames) {
    int logits = model.joint_step(tape, bound, tape.row(enc, t), state.h);
    const Tensor& row = tape.value(logits);
    int best = 0;
    for (int k = 1; k < row.cols; ++k) {
      if (row.data[k] > row.data[best]) best = k;
    }
    if (best == 0 || emits >= cfg.max_emits_per_frame) {
      ++t;
      emits = 0;
    } else {
      tokens.push_back(best);
      state = model.predictor_step(tape, bound, state, best);
      ++emits;
    }
  }
  return tokens;
}

std::vector<Hypothesis> nbest_decode(const TransducerModel& model,
                                     const Tensor& features, int n,
                                     const DecodeConfig& cfg) {
  Tape tape(/*grad_enabled=*/false);
  std::vector<int> bound = model.bind(tape, false);
  int enc = model.encode(tape, bound, features);
  const int frames = tape.value(enc).rows;
  const int beam = std::max(cfg.beam_width, n);

  struct Beam {
    double log_prob;
    LstmState state;
  };
  using BeamMap = std::map<std::vector<int>, Beam>;

  auto prune = [beam](BeamMap& hyps) {
    if (static_cast<int>(hyps.size()) <= beam) return;
    std::vector<std::pair<double, const std::vector<int>*>> order;
    order.reserve(hyps.size());
    for (const auto& [tokens, b] : hyps) order.push_back({b.log_prob, &tokens});
    std::nth_element(order.begin(), order.begin() + beam - 1, order.end(),
                     [](const auto& a, const auto& b) {
                       return a.first > b.first;
                     });
    double cutoff = order[beam - 1].first;
    int kept = 0;
    for (auto it = hyps.begin(); it != hyps.end();) {
      if (it->second.log_prob > cutoff ||
          (it->second.log_prob == cutoff && kept < beam)) {
        kept = it->second.log_prob == cutoff ? kept + 1 : kept;
        ++it;
      } else {
        it = hyps.erase(it);
      }
    }
  };

  BeamMap current;
  current[{}] = {0.0, model.predictor_start(tape, bound)};

  for (int t = 0; t < frames; ++t) {
    int enc_frame = tape.row(enc, t);
    BeamMap next;  // hypotheses that consumed frame t via blank
    BeamMap active = std::move(current);
    for (int round = 0; round <= cfg.max_emits_per_frame; ++round) {
      // Score every extension first and prune to the beam before paying for
      // any predictor step; only survivors get states.
      struct Candidate {
        double log_prob;
        const std::vector<int>* parent;
        int token;
      };
      std::map<std::vector<int>, Candidate> expanded;
      for (auto& [tokens, b] : active) {
        int logits = model.joint_step(tape, bound, enc_frame, b.state.h);
        std::vector<double> lp = log_softmax_row(tape.value(logits));
        // blank: move to the next frame, merging equal label histories
        double blank_lp = b.log_prob + lp[0];
        auto it = next.find(tokens);
        if (it == next.end()) {
          next.emplace(tokens, Beam{blank_lp, b.state});
        } else {
          it->second.log_prob = log_sum_exp(it->second.log_prob, blank_lp);
        }
        if (round == cfg.max_emits_per_frame) continue;
        std::vector<int> ext = tokens;
        ext.push_back(0);
        for (int k = 1; k < static_cast<int>(lp.size()); ++k) {
          ext.back() = k;
          double ext_lp = b.log_prob + lp[k];
          auto jt = expanded.find(ext);
          if (jt == expanded.end()) {
            expanded.emplace(ext, Candidate{ext_lp, &tokens, k});
          } else {
            jt->second.log_prob = log_sum_exp(jt->second.log_prob, ext_lp);
          }
        }
      }
      if (expanded.empty()) break;
      if (static_cast<int>(expanded.size()) > beam) {
        std::vector<double> scores;
        scores.reserve(expanded.size());
        for (const auto& [ext, c] : expanded) scores.push_back(c.log_prob);
        std::nth_element(scores.begin(), scores.begin() + beam - 1,
                         scores.end(), std::greater<double>());
        double cutoff = scores[beam - 1];
        int kept = 0;
        for (auto it = expanded.begin(); it != expanded.end();) {
          bool keep = it->second.log_prob > cutoff ||
                      (it->second.log_prob == cutoff && kept < beam);
          if (keep) {
            if (it->second.log_prob == cutoff) ++kept;
            ++it;
          } else {
            it = expanded.erase(it);
          }
        }
      }
      BeamMap survivors;
      for (auto& [ext, c] : expanded) {
        LstmState s = model.predictor_step(tape, bound,
                                           active.at(*c.parent).state, c.token);
        survivors.emplace(ext, Beam{c.log_prob, s});
      }
      active = std::move(survivors);
    }
    prune(next);
    current = std::move(next);
  }

  std::vector<Hypothesis> out;
  out.reserve(current.size());
  for (const auto& [tokens, b] : current) {
    Hypothesis h;
    h.tokens = tokens;
    h.log_prob = b.log_prob;
    h.score = std::exp(b.log_prob /
                       std::max<size_t>(1, tokens.size()));
    out.push_back(std::move(h));
  }
  std::sort(out.begin(), out.end(), [](const Hypothesis& a, const Hypothesis& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.tokens < b.tokens;
  });
  if (static_cast<int>(out.size()) > n) out.resize(n);
  return out;
}

}  // namespace nn
}  // namespace ensdist
