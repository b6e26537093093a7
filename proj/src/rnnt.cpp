// ensdist/rnnt.cpp

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

#include "ensdist/rnnt.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>
#include <thread>

#include "ensdist/errors.hpp"
#include "ensdist/tape.hpp"

namespace ensdist {
namespace rnnt {

namespace {

constexpr double kLogZero = -std::numeric_limits<double>::infinity();

double log_sum_exp(double a, double b) {
  if (a == kLogZero) return b;
  if (b == kLogZero) return a;
  double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

void validate(const LogitLattice& lattice, const std::vector<int>& targets) {
  if (static_cast<int>(targets.size()) != lattice.target_len) {
    throw InvalidLatticeError("rnnt: target length does not match lattice");
  }
  if (lattice.time_steps <= 0) {
    throw InvalidLatticeError("rnnt: lattice needs at least one frame");
  }
  for (int id : targets) {
    if (id < 1 || id > lattice.vocab_size) {
      throw VocabError("rnnt: target id out of range: " + std::to_string(id));
    }
  }
}

// Per-cell log-softmax over the symbol axis.
std::vector<double> log_probs(const LogitLattice& lattice) {
  std::vector<double> lp(lattice.logits.size());
  const int symbols = lattice.symbols();
  const size_t cells = lattice.logits.size() / symbols;
  for (size_t cell = 0; cell < cells; ++cell) {
    const double* in = &lattice.logits[cell * symbols];
    double* out = &lp[cell * symbols];
    double mx = in[0];
    for (int k = 1; k < symbols; ++k) mx = std::max(mx, in[k]);
    double denom = 0.0;
    for (int k = 0; k < symbols; ++k) denom += std::exp(in[k] - mx);
    double lse = mx + std::log(denom);
    for (int k = 0; k < symbols; ++k) out[k] = in[k] - lse;
  }
  return lp;
}

}  // namespace

AlphaBeta rnnt_alpha_beta(const LogitLattice& lattice,
                          const std::vector<int>& targets) {
  validate(lattice, targets);
  const int frames = lattice.time_steps;
  const int len = lattice.target_len;
  const int symbols = lattice.symbols();
  std::vector<double> lp = log_probs(lattice);
  auto lp_at = [&](int t, int u, int k) {
    return lp[(static_cast<size_t>(t) * (len + 1) + u) * symbols + k];
  };

  AlphaBeta ab;
  ab.alpha.assign(static_cast<size_t>(frames) * (len + 1), kLogZero);
  ab.beta.assign(static_cast<size_t>(frames) * (len + 1), kLogZero);
  auto a_at = [&](int t, int u) -> double& {
    return ab.alpha[static_cast<size_t>(t) * (len + 1) + u];
  };
  auto b_at = [&](int t, int u) -> double& {
    return ab.beta[static_cast<size_t>(t) * (len + 1) + u];
  };

  a_at(0, 0) = 0.0;
  for (int t = 0; t < frames; ++t) {
    for (int u = 0; u <= len; ++u) {
      if (t == 0 && u == 0) continue;
      double acc = kLogZero;
      if (t > 0) acc = log_sum_exp(acc, a_at(t - 1, u) + lp_at(t - 1, u, 0));
      if (u > 0) {
        acc = log_sum_exp(acc, a_at(t, u - 1) + lp_at(t, u - 1, targets[u - 1]));
      }
      a_at(t, u) = acc;
    }
  }
  ab.forward_total = a_at(frames - 1, len) + lp_at(frames - 1, len, 0);

  b_at(frames - 1, len) = lp_at(frames - 1, len, 0);
  for (int t = frames - 1; t >= 0; --t) {
    for (int u = len; u >= 0; --u) {
      if (t == frames - 1 && u == len) continue;
      double acc = kLogZero;
      if (t < frames - 1) acc = log_sum_exp(acc, lp_at(t, u, 0) + b_at(t + 1, u));
      if (u < len) {
        acc = log_sum_exp(acc, lp_at(t, u, targets[u]) + b_at(t, u + 1));
      }
      b_at(t, u) = acc;
    }
  }
  ab.backward_total = b_at(0, 0);
  return ab;
}

double rnnt_loss(const LogitLattice& lattice, const std::vector<int>& targets) {
  return -rnnt_alpha_beta(lattice, targets).forward_total;
}

LossAndGrad rnnt_loss_and_grad(const LogitLattice& lattice,
                               const std::vector<int>& targets) {
  AlphaBeta ab = rnnt_alpha_beta(lattice, targets);
  const int frames = lattice.time_steps;
  const int len = lattice.target_len;
  const int symbols = lattice.symbols();
  const double total = ab.forward_total;
  std::vector<double> lp = log_probs(lattice);

  LossAndGrad out;
  out.loss = -total;
  out.grad.assign(lattice.logits.size(), 0.0);
  out.grad_log_probs.assign(lattice.logits.size(), 0.0);

  auto lp_at = [&](int t, int u, int k) {
    return lp[(static_cast<size_t>(t) * (len + 1) + u) * symbols + k];
  };
  auto alpha = [&](int t, int u) {
    return ab.alpha[static_cast<size_t>(t) * (len + 1) + u];
  };
  auto beta = [&](int t, int u) {
    return ab.beta[static_cast<size_t>(t) * (len + 1) + u];
  };

  for (int t = 0; t < frames; ++t) {
    for (int u = 0; u <= len; ++u) {
      size_t base = (static_cast<size_t>(t) * (len + 1) + u) * symbols;
      // d(-logP)/d lp[k]: negative posterior occupancy of each transition.
      double g_blank = 0.0;
      if (t < frames - 1) {
        g_blank = -std::exp(alpha(t, u) + lp_at(t, u, 0) + beta(t + 1, u) -
                            total);
      } else if (u == len) {
        g_blank = -std::exp(alpha(t, u) + lp_at(t, u, 0) - total);
      }
      double g_label = 0.0;
      if (u < len) {
        g_label = -std::exp(alpha(t, u) + lp_at(t, u, targets[u]) +
                            beta(t, u + 1) - total);
      }
      double g_sum = g_blank + g_label;
      if (g_sum == 0.0) continue;
      out.grad_log_probs[base] = g_blank;
      if (u < len) out.grad_log_probs[base + targets[u]] = g_label;
      // Chain through log-softmax: dL/dlogit_k = g_k - softmax_k * sum(g).
      for (int k = 0; k < symbols; ++k) {
        double gk = k == 0 ? g_blank : (u < len && k == targets[u] ? g_label : 0.0);
        out.grad[base + k] = gk - std::exp(lp_at(t, u, k)) * g_sum;
      }
    }
  }
  return out;
}

MultiTeacherLoss weighted_multi_teacher_loss(
    nn::TransducerModel& model, const nn::Tensor& features,
    const std::vector<std::vector<int>>& teacher_tokens,
    const std::vector<double>& weights, bool train, int threads) {
  if (teacher_tokens.size() != weights.size()) {
    throw InvalidArityError(
        "weighted_multi_teacher_loss: weight/teacher count mismatch");
  }
  const size_t num_teachers = teacher_tokens.size();

  // Encoder once, on its own tape; the per-teacher work gets the encoder
  // output as a leaf and runs on independent tapes so it can fan out.
  nn::Tape enc_tape(train);
  std::vector<int> enc_bound = model.bind(enc_tape, train);
  int enc = model.encode(enc_tape, enc_bound, features);
  const nn::Tensor enc_values = enc_tape.value(enc);

  struct TeacherWork {
    double loss = 0.0;
    nn::Tape tape{true};
    std::vector<int> bound;
    int enc_leaf = -1;
  };
  std::vector<TeacherWork> work(num_teachers);

  auto run_teacher = [&](size_t i) {
    TeacherWork& w = work[i];
    bool want_grad = train && weights[i] != 0.0;
    nn::Tape tape(want_grad);
    w.bound = model.bind(tape, want_grad);
    w.enc_leaf = tape.leaf(enc_values, want_grad);
    int pred = model.predict(tape, w.bound, teacher_tokens[i]);
    std::vector<int> slabs = model.joint(tape, w.bound, w.enc_leaf, pred);
    LogitLattice lat = nn::lattice_from_tape(tape, slabs);
    if (want_grad) {
      LossAndGrad lg = rnnt_loss_and_grad(lat, teacher_tokens[i]);
      w.loss = lg.loss;
      const int rows = lat.target_len + 1;
      const int cols = lat.symbols();
      std::vector<std::pair<int, nn::Tensor>> seeds;
      seeds.reserve(slabs.size());
      for (size_t t = 0; t < slabs.size(); ++t) {
        nn::Tensor seed(rows, cols);
        std::copy(lg.grad.begin() + static_cast<int64_t>(t) * rows * cols,
                  lg.grad.begin() + static_cast<int64_t>(t + 1) * rows * cols,
                  seed.data.begin());
        for (double& v : seed.data) v *= weights[i];
        seeds.emplace_back(slabs[t], std::move(seed));
      }
      tape.backward(std::move(seeds));
    } else {
      w.loss = rnnt_loss(lat, teacher_tokens[i]);
    }
    w.tape = std::move(tape);
  };

  if (threads > 1 && num_teachers > 1) {
    std::vector<std::thread> pool;
    std::atomic<size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    size_t workers = std::min<size_t>(threads, num_teachers);
    for (size_t t = 0; t < workers; ++t) {
      pool.emplace_back([&] {
        for (size_t i; (i = next.fetch_add(1)) < num_teachers;) {
          try {
            run_teacher(i);
          } catch (...) {
            std::lock_guard<std::mutex> lock(error_mutex);
            if (!error) error = std::current_exception();
            return;
          }
        }
      });
    }
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
  } else {
    for (size_t i = 0; i < num_teachers; ++i) run_teacher(i);
  }

  MultiTeacherLoss result;
  nn::Tensor enc_seed(enc_values.rows, enc_values.cols, 0.0);
  bool any_enc_grad = false;
  // Fixed index-order reduction: results do not depend on thread timing.
  for (size_t i = 0; i < num_teachers; ++i) {
    result.per_teacher.push_back(work[i].loss);
    result.total += weights[i] * work[i].loss;
    if (train && weights[i] != 0.0) {
      model.accumulate_grads(work[i].tape, work[i].bound);
      const nn::Tensor& g = work[i].tape.grad(work[i].enc_leaf);
      if (!g.empty()) {
        any_enc_grad = true;
        for (int64_t j = 0; j < g.size(); ++j) enc_seed.data[j] += g.data[j];
      }
    }
  }
  if (train && any_enc_grad) {
    enc_tape.backward(enc, std::move(enc_seed));
    model.accumulate_grads(enc_tape, enc_bound);
  }
  return result;
}

}  // namespace rnnt
}  // namespace ensdist
