// ensdist/weighter.cpp

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

#include "ensdist/weighter.hpp"

#include "ensdist/errors.hpp"

namespace ensdist {
namespace nn {

WeighterModel::WeighterModel(WeighterConfig cfg,
                             std::vector<std::string> vocab, uint64_t seed)
    : cfg_(cfg), vocab_(std::move(vocab)), seed_(seed) {
  if (static_cast<int>(vocab_.size()) != cfg_.vocab_size) {
    throw ConfigError("weighter: vocab list size does not match vocab_size");
  }
  if (cfg_.num_experts < 2) {
    throw InvalidArityError("weighter: need at least two experts");
  }
  if (cfg_.hidden % cfg_.attention_heads != 0) {
    throw ConfigError("weighter: hidden must be divisible by attention_heads");
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
    for (int i = cfg_.hidden; i < 2 * cfg_.hidden; ++i) b.value.data[i] = 1.0;
    return idx;
  };

  audio_ = add_lstm("audio", cfg_.feature_dim);
  Rng re = init_rng("text.embedding");
  emb_ = params_.size();
  // rows: 0 unused, 1..V tokens, V+1 separator
  params_.add("text.embedding", cfg_.vocab_size + 2, cfg_.embed_dim, re);
  text_ = add_lstm("text", cfg_.embed_dim);

  for (auto [name, slot] : {std::pair<const char*, size_t*>{"attn.wq", &wq_},
                            {"attn.wk", &wk_},
                            {"attn.wv", &wv_},
                            {"attn.wo", &wo_}}) {
    Rng r = init_rng(name);
    *slot = params_.size();
    params_.add(name, cfg_.hidden, cfg_.hidden, r);
  }

  const bool segment = cfg_.pooling == WeighterConfig::Pooling::kSegmentMean;
  const int head_in =
      cfg_.hidden + (cfg_.use_entropy ? (segment ? 1 : cfg_.num_experts) : 0);
  const int head_out = segment ? 1 : cfg_.num_experts;
  Rng rh = init_rng("head.w1");
  head_w1_ = params_.size();
  params_.add("head.w1", head_in, cfg_.head_hidden, rh);
  head_b1_ = params_.size();
  params_.add_zeros("head.b1", 1, cfg_.head_hidden);
  Rng rh2 = init_rng("head.w2");
  head_w2_ = params_.size();
  params_.add("head.w2", cfg_.head_hidden, head_out, rh2);
  head_b2_ = params_.size();
  params_.add_zeros("head.b2", 1, head_out);
}

int WeighterModel::token_id(const std::string& token) const {
  for (size_t i = 0; i < vocab_.size(); ++i) {
    if (vocab_[i] == token) return static_cast<int>(i) + 1;
  }
  throw VocabError("weighter: token not in vocabulary: " + token);
}

std::vector<int> WeighterModel::to_ids(
    const metrics::TokenSequence& tokens) const {
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const std::string& t : tokens) ids.push_back(token_id(t));
  return ids;
}

std::vector<int> WeighterModel::bind(Tape& tape, bool trainable) const {
  std::vector<int> bound;
  bound.reserve(params_.size());
  for (const ParamTensor& p : params_) {
    bound.push_back(tape.leaf(p.value, trainable));
  }
  return bound;
}

int WeighterModel::forward(Tape& tape, const std::vector<int>& bound,
                           const Tensor& features,
                           const std::vector<std::vector<int>>& transcripts,
                           const std::vector<double>* entropy_features) const {
  if (static_cast<int>(transcripts.size()) != cfg_.num_experts) {
    throw InvalidArityError("weighter: transcript count does not match K");
  }
  if (cfg_.use_entropy) {
    if (entropy_features == nullptr ||
        static_cast<int>(entropy_features->size()) != cfg_.num_experts) {
      throw InvalidArityError(
          "weighter: entropy features required (one per expert)");
    }
  }
  if (features.cols != cfg_.feature_dim) {
    throw ShapeError("weighter: features " + features.shape_str() +
                     " incompatible with feature_dim " +
                     std::to_string(cfg_.feature_dim));
  }

  // The entropy side feature enters centered per utterance: the utterance
  // level of confidence carries no expert-choice information, the contrast
  // between experts does.
  std::vector<double> centered;
  if (cfg_.use_entropy) {
    double mean = 0.0;
    for (double h : *entropy_features) mean += h;
    mean /= static_cast<double>(entropy_features->size());
    for (double h : *entropy_features) centered.push_back(h - mean);
  }

  // Each expert segment starts with a separator embedding so that empty
  // transcripts still occupy at least one position.
  std::vector<int> ids;
  std::vector<std::pair<int, int>> segments;  // [start, end) per expert
  for (const std::vector<int>& t : transcripts) {
    int start = static_cast<int>(ids.size());
    ids.push_back(separator_id());
    for (int id : t) {
      if (id < 1 || id > cfg_.vocab_size) {
        throw VocabError("weighter: token id out of range: " +
                         std::to_string(id));
      }
      ids.push_back(id);
    }
    segments.push_back({start, static_cast<int>(ids.size())});
  }

  LstmNodeIds audio_nodes{bound[audio_.wx], bound[audio_.wh], bound[audio_.b]};
  LstmNodeIds text_nodes{bound[text_.wx], bound[text_.wh], bound[text_.b]};
  int audio_states =
      lstm_sequence(tape, tape.leaf(features), audio_nodes, cfg_.hidden);
  int text_in = tape.embedding(bound[emb_], ids);
  int text_states = lstm_sequence(tape, text_in, text_nodes, cfg_.hidden);

  AttentionNodeIds attn{bound[wq_], bound[wk_], bound[wv_], bound[wo_]};
  int ctx = multihead_attention(tape, text_states, audio_states, attn,
                                cfg_.attention_heads);
  int states = tape.add(ctx, text_states);

  int logits;
  if (cfg_.pooling == WeighterConfig::Pooling::kSegmentMean) {
    std::vector<int> expert_logits;
    for (int k = 0; k < cfg_.num_experts; ++k) {
      int pooled = tape.mean_rows(
          tape.slice_rows(states, segments[k].first, segments[k].second));
      int head_in = pooled;
      if (cfg_.use_entropy) {
        int h = tape.leaf(Tensor(1, 1, centered[k]));
        head_in = tape.concat_cols({pooled, h});
      }
      int h1 = tape.relu_op(
          tape.add(tape.matmul(head_in, bound[head_w1_]), bound[head_b1_]));
      expert_logits.push_back(
          tape.add(tape.matmul(h1, bound[head_w2_]), bound[head_b2_]));
    }
    logits = tape.concat_cols(expert_logits);
  } else {
    int pooled = tape.mean_rows(states);
    int head_in = pooled;
    if (cfg_.use_entropy) {
      Tensor h(1, cfg_.num_experts);
      for (int k = 0; k < cfg_.num_experts; ++k) h.data[k] = centered[k];
      head_in = tape.concat_cols({pooled, tape.leaf(std::move(h))});
    }
    int h1 = tape.relu_op(
        tape.add(tape.matmul(head_in, bound[head_w1_]), bound[head_b1_]));
    logits = tape.add(tape.matmul(h1, bound[head_w2_]), bound[head_b2_]);
  }
  return tape.softmax_rows(logits);
}

weighting::WeightVector WeighterModel::forward_numeric(
    const Tensor& features, const std::vector<std::vector<int>>& transcripts,
    const std::vector<double>* entropy_features) const {
  Tape tape(/*grad_enabled=*/false);
  std::vector<int> bound = bind(tape, false);
  int out = forward(tape, bound, features, transcripts, entropy_features);
  const Tensor& w = tape.value(out);
  return {w.data.begin(), w.data.end()};
}

void WeighterModel::accumulate_grads(const Tape& tape,
                                     const std::vector<int>& bound) {
  for (size_t i = 0; i < params_.size(); ++i) {
    const Tensor& g = tape.grad(bound[i]);
    if (g.empty()) continue;
    Tensor& dst = params_[i].grad;
    for (int64_t j = 0; j < g.size(); ++j) dst.data[j] += g.data[j];
  }
}

}  // namespace nn
}  // namespace ensdist
