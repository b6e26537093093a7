// tests/test_weighting.cpp

#include <cmath>
#include <vector>

#include "doctest.h"
#include "ensdist/errors.hpp"
#include "ensdist/metrics.hpp"
#include "ensdist/rng.hpp"
#include "ensdist/weighting.hpp"
#include "oracles.hpp"

using namespace ensdist;
using metrics::TokenSequence;
using weighting::WeightVector;

namespace {

double shannon_entropy(const WeightVector& w) {
  double h = 0.0;
  for (double v : w) {
    if (v > 0.0) h -= v * std::log(v);
  }
  return h;
}

TokenSequence with_subs(const TokenSequence& ref, int subs) {
  TokenSequence hyp = ref;
  for (int i = 0; i < subs; ++i) hyp[i] = "wrong" + std::to_string(i);
  return hyp;
}

}  // namespace

TEST_CASE("uniform_weights") {
  CHECK(weighting::uniform_weights(3) ==
        WeightVector{1.0 / 3, 1.0 / 3, 1.0 / 3});
  CHECK(weighting::uniform_weights(1) == WeightVector{1.0});
  CHECK(weighting::uniform_weights(4) == WeightVector{0.25, 0.25, 0.25, 0.25});
  CHECK_THROWS_AS(weighting::uniform_weights(0), InvalidArityError);
}

TEST_CASE("best_expert_weights picks the argmin with lowest-index ties") {
  // Validation WER tables for three experts under the two partitioning
  // schemes; the third (resp. second) expert wins.
  CHECK(weighting::best_expert_weights({25.18, 25.29, 24.27}) ==
        WeightVector{0, 0, 1});
  CHECK(weighting::best_expert_weights({13.65, 10.99, 16.07}) ==
        WeightVector{0, 1, 0});
  CHECK(weighting::best_expert_weights({5.0, 5.0, 5.0}) ==
        WeightVector{1, 0, 0});
}

TEST_CASE("oracle_weights is one-hot on the lowest-WER expert") {
  TokenSequence ref;
  for (int i = 0; i < 10; ++i) ref.push_back("t" + std::to_string(i));

  CHECK(weighting::oracle_weights(
            ref, {with_subs(ref, 1), with_subs(ref, 3), with_subs(ref, 5)}) ==
        WeightVector{1, 0, 0});
  CHECK(weighting::oracle_weights(ref, {ref, ref, ref}) ==
        WeightVector{1, 0, 0});
  CHECK(weighting::oracle_weights(
            ref, {with_subs(ref, 4), with_subs(ref, 2), with_subs(ref, 3)}) ==
        WeightVector{0, 1, 0});
}

TEST_CASE("oracle weights score a perfect weighter accuracy") {
  Rng rng(31);
  TokenSequence ref;
  for (int i = 0; i < 9; ++i) ref.push_back("t" + std::to_string(i));
  std::vector<std::vector<double>> predictions;
  std::vector<TokenSequence> refs;
  std::vector<std::vector<TokenSequence>> hyps;
  for (int u = 0; u < 40; ++u) {
    std::vector<TokenSequence> h = {with_subs(ref, rng.uniform_int(6)),
                                    with_subs(ref, rng.uniform_int(6)),
                                    with_subs(ref, rng.uniform_int(6))};
    predictions.push_back(weighting::oracle_weights(ref, h));
    refs.push_back(ref);
    hyps.push_back(h);
  }
  CHECK(metrics::weighter_accuracy(predictions, refs, hyps) == 1.0);
}

TEST_CASE("temperature_renormalize on the spec examples") {
  for (double t : {0.3, 1.0, 4.0}) {
    auto w = weighting::temperature_renormalize({1.0 / 3, 1.0 / 3, 1.0 / 3}, t);
    for (double v : w) CHECK(v == doctest::Approx(1.0 / 3).epsilon(1e-12));
  }

  auto w = weighting::temperature_renormalize({1, 0, 0}, 1.0);
  CHECK(w[0] == doctest::Approx(0.576117).epsilon(1e-5));
  CHECK(w[1] == doctest::Approx(0.211942).epsilon(1e-5));
  CHECK(w[2] == doctest::Approx(0.211942).epsilon(1e-5));

  // T -> 0+ approaches one-hot on the argmax.
  w = weighting::temperature_renormalize({0.7, 0.2, 0.1}, 1e-3);
  CHECK(std::fabs(w[0] - 1.0) < 1e-2);
  CHECK(w[1] < 1e-2);
  CHECK(w[2] < 1e-2);

  CHECK_THROWS_AS(weighting::temperature_renormalize({1, 0}, 0.0), ConfigError);
  CHECK_THROWS_AS(weighting::temperature_renormalize({1, 0}, -1.0),
                  ConfigError);
}

TEST_CASE("temperature_renormalize preserves argmax and sums to one") {
  Rng rng(41);
  for (int trial = 0; trial < 200; ++trial) {
    int k = 2 + rng.uniform_int(4);
    WeightVector w(k);
    double total = 0.0;
    for (double& v : w) {
      v = rng.uniform();
      total += v;
    }
    for (double& v : w) v /= total;
    size_t argmax = 0;
    for (size_t i = 1; i < w.size(); ++i) {
      if (w[i] > w[argmax]) argmax = i;
    }
    for (double t : {0.1, 1.0, 10.0}) {
      auto r = weighting::temperature_renormalize(w, t);
      double sum = 0.0;
      for (double v : r) sum += v;
      CHECK(std::fabs(sum - 1.0) < 1e-12);
      size_t r_argmax = 0;
      for (size_t i = 1; i < r.size(); ++i) {
        if (r[i] > r[r_argmax]) r_argmax = i;
      }
      CHECK(r_argmax == argmax);
    }
  }
}

TEST_CASE("renormalization at T=1 flattens near-one-hot weights") {
  Rng rng(43);
  for (int trial = 0; trial < 100; ++trial) {
    WeightVector w(3, 0.0);
    int hot = rng.uniform_int(3);
    double peak = 0.9 + 0.1 * rng.uniform();
    w[hot] = peak;
    double rest = (1.0 - peak) * rng.uniform();
    w[(hot + 1) % 3] = rest;
    w[(hot + 2) % 3] = 1.0 - peak - rest;
    auto r = weighting::temperature_renormalize(w, 1.0);
    CHECK(shannon_entropy(r) > shannon_entropy(w));
  }
}

TEST_CASE("bce_loss on the spec examples") {
  double eps = weighting::kBceEpsilon;
  auto r = weighting::bce_loss({1.0 - eps, eps, eps}, {1, 0, 0});
  CHECK(r.loss == doctest::Approx(0.0).epsilon(1e-5));

  r = weighting::bce_loss({0.5, 0.25, 0.25}, {1, 0, 0});
  CHECK(r.loss == doctest::Approx(1.268511).epsilon(1e-6));

  r = weighting::bce_loss({0.5, 0.5, eps}, {1, 1, 0});
  CHECK(r.loss == doctest::Approx(1.386294).epsilon(1e-6));

  CHECK_THROWS_AS(weighting::bce_loss({0.5, 0.5}, {1, 0, 0}),
                  InvalidArityError);
}

TEST_CASE("bce_loss gradient matches central finite differences") {
  Rng rng(47);
  for (int trial = 0; trial < 100; ++trial) {
    int k = 2 + rng.uniform_int(3);
    WeightVector w(k);
    metrics::SupervisionTarget z(k, 0);
    z[rng.uniform_int(k)] = 1;
    for (double& v : w) v = 0.05 + 0.9 * rng.uniform();
    auto r = weighting::bce_loss(w, z);
    for (int i = 0; i < k; ++i) {
      double fd = oracles::central_difference(
          [&](double xi) {
            WeightVector wp = w;
            wp[static_cast<size_t>(i)] = xi;
            return weighting::bce_loss(wp, z).loss;
          },
          w[static_cast<size_t>(i)], 1e-6);
      CHECK(oracles::relative_error(r.grad[static_cast<size_t>(i)], fd) < 1e-5);
    }
  }
}

TEST_CASE("bce_loss is minimized when weights hit the targets") {
  double eps = weighting::kBceEpsilon;
  metrics::SupervisionTarget z = {1, 0, 1};
  double at_target =
      weighting::bce_loss({1.0 - eps, eps, 1.0 - eps}, z).loss;
  Rng rng(53);
  for (int trial = 0; trial < 50; ++trial) {
    WeightVector w = {rng.uniform(), rng.uniform(), rng.uniform()};
    CHECK(weighting::bce_loss(w, z).loss >= at_target);
  }
}
