// tests/oracles.hpp
//
// Independent brute-force oracles used by the test suites. Everything here
// is deliberately naive (enumeration, quadrature-free direct sums, finite
// differences) and shares no code with the library implementations it
// checks.

#ifndef ENSDIST_TESTS_ORACLES_HPP_
#define ENSDIST_TESTS_ORACLES_HPP_

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <string>
#include <vector>

namespace oracles {

// Minimum edit cost by explicit enumeration of every monotone edit path
// (diagonal / delete / insert moves), no DP. Exponential; lengths <= 6 only.
inline int edit_cost_enumerate(const std::vector<std::string>& ref,
                               const std::vector<std::string>& hyp,
                               size_t i = 0, size_t j = 0) {
  if (i == ref.size()) return static_cast<int>(hyp.size() - j);
  if (j == hyp.size()) return static_cast<int>(ref.size() - i);
  int best = std::numeric_limits<int>::max();
  best = std::min(best, edit_cost_enumerate(ref, hyp, i + 1, j + 1) +
                            (ref[i] == hyp[j] ? 0 : 1));
  best = std::min(best, edit_cost_enumerate(ref, hyp, i + 1, j) + 1);
  best = std::min(best, edit_cost_enumerate(ref, hyp, i, j + 1) + 1);
  return best;
}

// All token sequences of length <= max_len over the given vocabulary.
inline std::vector<std::vector<std::string>> all_sequences(
    const std::vector<std::string>& vocab, int max_len) {
  std::vector<std::vector<std::string>> out = {{}};
  std::vector<std::vector<std::string>> frontier = {{}};
  for (int len = 1; len <= max_len; ++len) {
    std::vector<std::vector<std::string>> next;
    for (const auto& seq : frontier) {
      for (const auto& tok : vocab) {
        auto extended = seq;
        extended.push_back(tok);
        out.push_back(extended);
        next.push_back(std::move(extended));
      }
    }
    frontier = std::move(next);
  }
  return out;
}

// Shannon entropy of positive scores, written independently of the library:
// normalizes with long-double accumulation and sums in reverse order.
inline double entropy_second_impl(const std::vector<double>& scores) {
  long double total = 0.0L;
  for (double s : scores) total += static_cast<long double>(s);
  long double h = 0.0L;
  for (auto it = scores.rbegin(); it != scores.rend(); ++it) {
    long double p = static_cast<long double>(*it) / total;
    if (p > 0.0L) h -= p * std::log(p);
  }
  return static_cast<double>(h);
}

// Central finite difference d f / d x_i with step h.
inline double central_difference(const std::function<double(double)>& f_of_xi,
                                 double xi, double h) {
  return (f_of_xi(xi + h) - f_of_xi(xi - h)) / (2.0 * h);
}

// Relative error with an absolute floor, for comparing gradients.
inline double relative_error(double a, double b, double floor = 1e-8) {
  double denom = std::max({std::fabs(a), std::fabs(b), floor});
  return std::fabs(a - b) / denom;
}

// Sum over all monotone RNN-T alignment paths by explicit recursion on the
// (t, u) lattice: a path emits label u+1 (move up) or blank (move right) and
// finishes with the final blank from (T-1, U). Probabilities from log-probs
// by direct exponentiation; T, U small.
//
// log_prob(t, u, k): per-cell log-probability of symbol k (0 = blank,
// labels 1..V), typically log-softmaxed logits.
inline double rnnt_path_sum(
    int num_frames, int target_len,
    const std::function<double(int, int, int)>& log_prob,
    const std::vector<int>& targets, int t = 0, int u = 0) {
  double total = 0.0;
  if (t == num_frames - 1 && u == target_len) {
    return std::exp(log_prob(t, u, 0));  // final blank only
  }
  if (t < num_frames - 1) {
    total += std::exp(log_prob(t, u, 0)) *
             rnnt_path_sum(num_frames, target_len, log_prob, targets, t + 1, u);
  }
  if (u < target_len) {
    total += std::exp(log_prob(t, u, targets[u])) *
             rnnt_path_sum(num_frames, target_len, log_prob, targets, t, u + 1);
  }
  return total;
}

// Like rnnt_path_sum but restricted to paths with at most `cap` consecutive
// label emissions per frame, matching the decoder's per-frame emission cap.
inline double rnnt_path_sum_capped(
    int num_frames, int target_len,
    const std::function<double(int, int, int)>& log_prob,
    const std::vector<int>& targets, int cap, int t = 0, int u = 0,
    int emits = 0) {
  double total = 0.0;
  if (t == num_frames - 1 && u == target_len) {
    return std::exp(log_prob(t, u, 0));
  }
  if (t < num_frames - 1) {
    total += std::exp(log_prob(t, u, 0)) *
             rnnt_path_sum_capped(num_frames, target_len, log_prob, targets,
                                  cap, t + 1, u, 0);
  }
  if (u < target_len && emits < cap) {
    total += std::exp(log_prob(t, u, targets[u])) *
             rnnt_path_sum_capped(num_frames, target_len, log_prob, targets,
                                  cap, t, u + 1, emits + 1);
  }
  return total;
}

// Minimum within-cluster sum of squared distances over every assignment of
// points to k clusters (exhaustive; n small).
inline double best_partition_sse(const std::vector<std::vector<double>>& points,
                                 int k, std::vector<int>* best_assign = nullptr) {
  const size_t n = points.size();
  const size_t dim = points.empty() ? 0 : points[0].size();
  std::vector<int> assign(n, 0);
  double best = std::numeric_limits<double>::infinity();
  std::function<void(size_t)> rec = [&](size_t idx) {
    if (idx == n) {
      double sse = 0.0;
      for (int c = 0; c < k; ++c) {
        std::vector<double> mean(dim, 0.0);
        int count = 0;
        for (size_t p = 0; p < n; ++p) {
          if (assign[p] != c) continue;
          ++count;
          for (size_t d = 0; d < dim; ++d) mean[d] += points[p][d];
        }
        if (count == 0) continue;
        for (double& m : mean) m /= count;
        for (size_t p = 0; p < n; ++p) {
          if (assign[p] != c) continue;
          for (size_t d = 0; d < dim; ++d) {
            double diff = points[p][d] - mean[d];
            sse += diff * diff;
          }
        }
      }
      if (sse < best) {
        best = sse;
        if (best_assign != nullptr) *best_assign = assign;
      }
      return;
    }
    for (int c = 0; c < k; ++c) {
      assign[idx] = c;
      rec(idx + 1);
    }
  };
  rec(0);
  return best;
}

// Adjusted Rand index between two labelings.
inline double adjusted_rand_index(const std::vector<int>& a,
                                  const std::vector<int>& b) {
  const size_t n = a.size();
  std::map<std::pair<int, int>, double> joint;
  std::map<int, double> ca, cb;
  for (size_t i = 0; i < n; ++i) {
    joint[{a[i], b[i]}] += 1;
    ca[a[i]] += 1;
    cb[b[i]] += 1;
  }
  auto comb2 = [](double x) { return x * (x - 1.0) / 2.0; };
  double sum_ij = 0.0, sum_a = 0.0, sum_b = 0.0;
  for (const auto& [key, v] : joint) sum_ij += comb2(v);
  for (const auto& [key, v] : ca) sum_a += comb2(v);
  for (const auto& [key, v] : cb) sum_b += comb2(v);
  double total = comb2(static_cast<double>(n));
  double expected = sum_a * sum_b / total;
  double max_index = 0.5 * (sum_a + sum_b);
  if (max_index == expected) return 1.0;
  return (sum_ij - expected) / (max_index - expected);
}

}  // namespace oracles

#endif  // ENSDIST_TESTS_ORACLES_HPP_
