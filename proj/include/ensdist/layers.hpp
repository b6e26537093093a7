// ensdist/layers.hpp

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

#ifndef ENSDIST_LAYERS_HPP_
#define ENSDIST_LAYERS_HPP_

#include <cmath>
#include <utility>
#include <vector>

#include "ensdist/tape.hpp"

namespace ensdist {
namespace nn {

// Node ids of one LSTM layer's parameters on a tape.
// wx: (in x 4H), wh: (H x 4H), b: (1 x 4H); gate order [i, f, g, o].
struct LstmNodeIds {
  int wx;
  int wh;
  int b;
};

struct LstmState {
  int h;  // (1 x H)
  int c;  // (1 x H)
};

// One recurrent cell step: returns the updated state.
inline LstmState lstm_step(Tape& t, int x, LstmState s, const LstmNodeIds& p,
                           int hidden) {
  int zx = t.matmul(x, p.wx);
  int cell = t.lstm_cell(zx, s.h, s.c, p.wh, p.b, hidden);
  return {t.row(cell, 0), t.row(cell, 1)};
}

inline LstmState lstm_zero_state(Tape& t, int hidden) {
  int h = t.leaf(Tensor(1, hidden, 0.0));
  int c = t.leaf(Tensor(1, hidden, 0.0));
  return {h, c};
}

// Unrolls a unidirectional LSTM over the rows of `input` (T x in) and
// returns the (T x H) hidden-state stack. The input projection for all
// steps is hoisted into one matmul.
inline int lstm_sequence(Tape& t, int input, const LstmNodeIds& p, int hidden) {
  int steps = t.value(input).rows;
  int zx_all = t.matmul(input, p.wx);  // (T x 4H)
  LstmState s = lstm_zero_state(t, hidden);
  std::vector<int> rows;
  rows.reserve(steps);
  for (int i = 0; i < steps; ++i) {
    int cell = t.lstm_cell(t.row(zx_all, i), s.h, s.c, p.wh, p.b, hidden);
    s = {t.row(cell, 0), t.row(cell, 1)};
    rows.push_back(s.h);
  }
  return t.concat_rows(rows);
}

// Node ids for one multi-head scaled-dot-product attention block.
// All projections are (D x D); D must be divisible by the head count.
struct AttentionNodeIds {
  int wq;
  int wk;
  int wv;
  int wo;
};

// queries: (L x D), keys_values: (T x D) -> (L x D) context.
inline int multihead_attention(Tape& t, int queries, int keys_values,
                               const AttentionNodeIds& p, int num_heads) {
  int d = t.value(queries).cols;
  int dh = d / num_heads;
  int q = t.matmul(queries, p.wq);
  int k = t.matmul(keys_values, p.wk);
  int v = t.matmul(keys_values, p.wv);
  std::vector<int> heads;
  heads.reserve(num_heads);
  for (int hIdx = 0; hIdx < num_heads; ++hIdx) {
    int qh = t.slice_cols(q, hIdx * dh, (hIdx + 1) * dh);
    int kh = t.slice_cols(k, hIdx * dh, (hIdx + 1) * dh);
    int vh = t.slice_cols(v, hIdx * dh, (hIdx + 1) * dh);
    int scores = t.scale(t.matmul(qh, t.transpose(kh)),
                         1.0 / std::sqrt(static_cast<double>(dh)));
    heads.push_back(t.matmul(t.softmax_rows(scores), vh));
  }
  return t.matmul(t.concat_cols(heads), p.wo);
}

}  // namespace nn
}  // namespace ensdist

#endif  // ENSDIST_LAYERS_HPP_
