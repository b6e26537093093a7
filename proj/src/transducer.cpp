// ensdist/transducer.cpp

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

#include "ensdist/transducer.hpp"

#include <algorithm>

#include "ensdist/errors.hpp"

namespace ensdist {
namespace nn {

TransducerModel::TransducerModel(TransducerConfig cfg,
                                 std::vector<std::string> vocab, uint64_t seed)
    : cfg_(cfg), vocab_(std::move(vocab)), seed_(seed) {
  if (static_cast<int>(vocab_.size()) != cfg_.vocab_size) {
    throw ConfigError("transducer: vocab list size does not match vocab_size");
  }
  auto init_rng = [&](const std::string& name) {
    return Rng(derive_seed(seed_, "param:" + name));
  };
  auto add_lstm = [&](const std::string& prefix, int in_dim) {
    LstmIdx idx;
    Rng r1 = init_rng(prefix + ".wx");
    idx.wx = params_.size();
    params_.add(prefix + ".wx", in_dim, 4 * cfg_.hidden, r1);
    Rng r2 = init_rng(prefix + ".wh");
    idx.wh = params_.size();
    params_.add(prefix + ".wh", cfg_.hidden, 4 * cfg_.hidden, r2);
    idx.b = params_.size();
    ParamTensor& b = params_.add_zeros(prefix + ".b", 1, 4 * cfg_.hidden);
    // forget-gate bias starts at 1 so early training does not wash out state
    for (int i = cfg_.hidden; i < 2 * cfg_.hidden; ++i) b.value.data[i] = 1.0;
    return idx;
  };

  int in_dim = cfg_.feature_dim;
  for (int l = 0; l < cfg_.encoder_layers; ++l) {
    enc_layers_.push_back(add_lstm("encoder." + std::to_string(l), in_dim));
    in_dim = cfg_.hidden;
  }

  Rng re = init_rng("predictor.embedding");
  emb_ = params_.size();
  params_.add("predictor.embedding", cfg_.vocab_size + 1, cfg_.embed_dim, re);
  in_dim = cfg_.embed_dim;
  for (int l = 0; l < cfg_.predictor_layers; ++l) {
    pred_layers_.push_back(add_lstm("predictor." + std::to_string(l), in_dim));
    in_dim = cfg_.hidden;
  }

  Rng rj1 = init_rng("joiner.enc_proj");
  join_enc_ = params_.size();
  params_.add("joiner.enc_proj", cfg_.hidden, cfg_.joiner_hidden, rj1);
  Rng rj2 = init_rng("joiner.pred_proj");
  join_pred_ = params_.size();
  params_.add("joiner.pred_proj", cfg_.hidden, cfg_.joiner_hidden, rj2);
  join_b_ = params_.size();
  params_.add_zeros("joiner.bias", 1, cfg_.joiner_hidden);
  Rng rj3 = init_rng("joiner.out");
  join_out_ = params_.size();
  params_.add("joiner.out", cfg_.joiner_hidden, cfg_.vocab_size + 1, rj3);
  join_out_b_ = params_.size();
  params_.add_zeros("joiner.out_bias", 1, cfg_.vocab_size + 1);
}

int TransducerModel::token_id(const std::string& token) const {
  for (size_t i = 0; i < vocab_.size(); ++i) {
    if (vocab_[i] == token) return static_cast<int>(i) + 1;
  }
  throw VocabError("transducer: token not in vocabulary: " + token);
}

std::vector<int> TransducerModel::to_ids(
    const metrics::TokenSequence& tokens) const {
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const std::string& t : tokens) ids.push_back(token_id(t));
  return ids;
}

metrics::TokenSequence TransducerModel::to_tokens(
    const std::vector<int>& ids) const {
  metrics::TokenSequence out;
  out.reserve(ids.size());
  for (int id : ids) {
    if (id < 1 || id > cfg_.vocab_size) {
      throw VocabError("transducer: token id out of range: " +
                       std::to_string(id));
    }
    out.push_back(vocab_[static_cast<size_t>(id) - 1]);
  }
  return out;
}

std::vector<int> TransducerModel::bind(Tape& tape, bool trainable) const {
  std::vector<int> bound;
  bound.reserve(params_.size());
  for (const ParamTensor& p : params_) {
    bound.push_back(tape.leaf(p.value, trainable));
  }
  return bound;
}

int TransducerModel::encode(Tape& tape, const std::vector<int>& bound,
                            const Tensor& features) const {
  if (features.cols != cfg_.feature_dim || features.rows < 1) {
    throw ShapeError("transducer.encode: features " + features.shape_str() +
                     " incompatible with feature_dim " +
                     std::to_string(cfg_.feature_dim));
  }
  int x = tape.leaf(features);
  for (const LstmIdx& layer : enc_layers_) {
    x = lstm_sequence(tape, x, lstm_nodes(bound, layer), cfg_.hidden);
  }
  return x;
}

int TransducerModel::predict(Tape& tape, const std::vector<int>& bound,
                             const std::vector<int>& tokens) const {
  std::vector<int> ids;
  ids.reserve(tokens.size() + 1);
  ids.push_back(0);  // start symbol shares the blank embedding row
  for (int id : tokens) {
    if (id < 1 || id > cfg_.vocab_size) {
      throw VocabError("transducer.predict: token id out of range: " +
                       std::to_string(id));
    }
    ids.push_back(id);
  }
  int x = tape.embedding(bound[emb_], ids);
  for (const LstmIdx& layer : pred_layers_) {
    x = lstm_sequence(tape, x, lstm_nodes(bound, layer), cfg_.hidden);
  }
  return x;
}

std::vector<int> TransducerModel::joint(Tape& tape,
                                        const std::vector<int>& bound,
                                        int encoded, int predicted) const {
  int enc_proj = tape.matmul(encoded, bound[join_enc_]);      // (T x J)
  int pred_proj = tape.add(tape.matmul(predicted, bound[join_pred_]),
                           bound[join_b_]);                   // (U+1 x J)
  int frames = tape.value(encoded).rows;
  std::vector<int> slabs;
  slabs.reserve(frames);
  for (int t = 0; t < frames; ++t) {
    int cell = tape.tanh_op(tape.add(pred_proj, tape.row(enc_proj, t)));
    slabs.push_back(tape.add(tape.matmul(cell, bound[join_out_]),
                             bound[join_out_b_]));  // (U+1 x V+1)
  }
  return slabs;
}

LstmState TransducerModel::predictor_start(
    Tape& tape, const std::vector<int>& bound) const {
  LstmState s = lstm_zero_state(tape, cfg_.hidden);
  return predictor_step(tape, bound, s, 0);
}

LstmState TransducerModel::predictor_step(Tape& tape,
                                          const std::vector<int>& bound,
                                          LstmState state, int token_id) const {
  int x = tape.embedding(bound[emb_], {token_id});
  // Stepwise path supports a single predictor layer, which is all the desk
  // scale uses; stacked predictors would need per-layer state threading.
  return lstm_step(tape, x, state, lstm_nodes(bound, pred_layers_[0]),
                   cfg_.hidden);
}

int TransducerModel::joint_step(Tape& tape, const std::vector<int>& bound,
                                int enc_frame, int pred_state_h) const {
  int cell = tape.tanh_op(
      tape.add(tape.add(tape.matmul(pred_state_h, bound[join_pred_]),
                        bound[join_b_]),
               tape.matmul(enc_frame, bound[join_enc_])));
  return tape.add(tape.matmul(cell, bound[join_out_]), bound[join_out_b_]);
}

void TransducerModel::accumulate_grads(const Tape& tape,
                                       const std::vector<int>& bound) {
  for (size_t i = 0; i < params_.size(); ++i) {
    const Tensor& g = tape.grad(bound[i]);
    if (g.empty()) continue;
    Tensor& dst = params_[i].grad;
    for (int64_t j = 0; j < g.size(); ++j) dst.data[j] += g.data[j];
  }
}

LogitLattice lattice_from_tape(const Tape& tape,
                               const std::vector<int>& slabs) {
  const Tensor& first = tape.value(slabs[0]);
  LogitLattice lat(static_cast<int>(slabs.size()), first.rows - 1,
                   first.cols - 1);
  for (size_t t = 0; t < slabs.size(); ++t) {
    const Tensor& slab = tape.value(slabs[t]);
    std::copy(slab.data.begin(), slab.data.end(),
              lat.logits.begin() +
                  static_cast<size_t>(t) * slab.rows * slab.cols);
  }
  return lat;
}

LogitLattice student_forward(const TransducerModel& model,
                             const Tensor& features,
                             const std::vector<int>& tokens) {
  Tape tape(/*grad_enabled=*/false);
  std::vector<int> bound = model.bind(tape, /*trainable=*/false);
  int enc = model.encode(tape, bound, features);
  int pred = model.predict(tape, bound, tokens);
  std::vector<int> slabs = model.joint(tape, bound, enc, pred);
  return lattice_from_tape(tape, slabs);
}

}  // namespace nn
}  // namespace ensdist
