// tests/test_fusion.cpp

#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "ensdist/errors.hpp"
#include "ensdist/fusion.hpp"
#include "ensdist/metrics.hpp"
#include "ensdist/rng.hpp"
#include "oracles.hpp"

using namespace ensdist;
using fusion::VotingScheme;
using metrics::TokenSequence;

TEST_CASE("build_wtn on the spec examples") {
  auto wtn = fusion::build_wtn({{"a", "b"}, {"a", "b"}});
  REQUIRE(wtn.slots.size() == 2);
  CHECK(wtn.slots[0].candidates.at("a").count == 2);
  CHECK(wtn.slots[1].candidates.at("b").count == 2);

  wtn = fusion::build_wtn({{"a", "b", "c"}, {"a", "x", "c"}});
  REQUIRE(wtn.slots.size() == 3);
  CHECK(wtn.slots[1].candidates.at("b").count == 1);
  CHECK(wtn.slots[1].candidates.at("x").count == 1);

  wtn = fusion::build_wtn({{"a", "b"}, {"a", "b", "c"}});
  REQUIRE(wtn.slots.size() == 3);
  CHECK(wtn.slots[2].candidates.at(fusion::kNullToken).count == 1);
  CHECK(wtn.slots[2].candidates.at("c").count == 1);

  CHECK_THROWS_AS(fusion::build_wtn({}), EmptyInputError);
}

TEST_CASE("slot counts always sum to the number of hypotheses") {
  Rng rng(5);
  std::vector<std::string> vocab = {"a", "b", "c"};
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<TokenSequence> hyps;
    int n = 1 + rng.uniform_int(4);
    for (int k = 0; k < n; ++k) {
      TokenSequence h;
      int len = rng.uniform_int(5);
      for (int i = 0; i < len; ++i) h.push_back(vocab[rng.uniform_int(3)]);
      hyps.push_back(h);
    }
    auto wtn = fusion::build_wtn(hyps);
    for (const auto& slot : wtn.slots) {
      int total = 0;
      for (const auto& [tok, entry] : slot.candidates) total += entry.count;
      CHECK(total == n);
    }
  }
}

TEST_CASE("vote on the spec examples") {
  // Unanimous slots reproduce the input.
  TokenSequence h = {"w1", "w2", "w3"};
  CHECK(fusion::rover({h, h, h}, VotingScheme::frequency()) == h);

  // b:2 beats x:1; c:1 vs d:1 tie resolved lexicographically to "c".
  auto fused = fusion::rover({{"a", "b", "c"}, {"a", "x", "c"}, {"a", "b", "d"}},
                             VotingScheme::frequency());
  CHECK(fused == TokenSequence{"a", "b", "c"});

  // Trailing token wins against NULL 2:1.
  fused = fusion::rover({{"a", "b"}, {"a", "b", "c"}, {"a", "b", "c"}},
                        VotingScheme::frequency());
  CHECK(fused == TokenSequence{"a", "b", "c"});
}

TEST_CASE("unanimity holds for any scheme") {
  TokenSequence h = {"x", "y"};
  for (double alpha : {0.0, 0.3, 1.0}) {
    std::vector<double> confs = {0.9, 0.8, 0.7};
    CHECK(fusion::rover({h, h, h}, VotingScheme::confidence(alpha), &confs) == h);
  }
}

TEST_CASE("NULL loses voting ties") {
  // Slot 2 sees c:1 vs NULL:1 under two hypotheses; the token must win.
  auto fused = fusion::rover({{"a"}, {"a", "c"}}, VotingScheme::frequency());
  CHECK(fused == TokenSequence{"a", "c"});
}

TEST_CASE("duplicating a hypothesis only ever helps that hypothesis") {
  Rng rng(11);
  std::vector<std::string> vocab = {"a", "b", "c"};
  for (int trial = 0; trial < 60; ++trial) {
    std::vector<TokenSequence> hyps;
    for (int k = 0; k < 3; ++k) {
      TokenSequence h;
      int len = 1 + rng.uniform_int(3);
      for (int i = 0; i < len; ++i) h.push_back(vocab[rng.uniform_int(3)]);
      hyps.push_back(h);
    }
    auto base = fusion::rover(hyps, VotingScheme::frequency());
    auto dup = hyps;
    dup.push_back(hyps[2]);
    auto boosted = fusion::rover(dup, VotingScheme::frequency());
    // The duplicated hypothesis's slots can only gain votes, so any change
    // must move the output toward tokens of that hypothesis.
    if (boosted != base) {
      std::set<std::string> allowed(hyps[2].begin(), hyps[2].end());
      for (const auto& tok : boosted) {
        bool was_in_base =
            std::find(base.begin(), base.end(), tok) != base.end();
        if (!was_in_base) CHECK(allowed.count(tok) == 1);
      }
    }
  }
}

TEST_CASE("two agreeing hypotheses out of three win the frequency vote") {
  // Exhaustive over all pairs (majority, dissent) of length <= 3 sequences
  // on a 3-token vocabulary, majority presented twice.
  std::vector<std::string> vocab = {"a", "b", "c"};
  auto seqs = oracles::all_sequences(vocab, 3);
  for (const auto& maj : seqs) {
    for (const auto& other : seqs) {
      auto fused =
          fusion::rover({maj, other, maj}, VotingScheme::frequency());
      CHECK(fused == maj);
    }
  }
}

TEST_CASE("confidence voting can override raw counts") {
  // Counts favor "b" 2:1 but the dissenting hypothesis is far more
  // confident; alpha small enough lets confidence dominate.
  std::vector<TokenSequence> hyps = {{"b"}, {"b"}, {"z"}};
  std::vector<double> confs = {0.1, 0.1, 0.99};
  CHECK(fusion::rover(hyps, VotingScheme::frequency(), &confs) ==
        TokenSequence{"b"});
  CHECK(fusion::rover(hyps, VotingScheme::confidence(0.1), &confs) ==
        TokenSequence{"z"});
}

TEST_CASE("frequency equals confidence with alpha one") {
  Rng rng(13);
  std::vector<std::string> vocab = {"a", "b", "c"};
  for (int trial = 0; trial < 40; ++trial) {
    std::vector<TokenSequence> hyps;
    std::vector<double> confs;
    for (int k = 0; k < 3; ++k) {
      TokenSequence h;
      int len = rng.uniform_int(4);
      for (int i = 0; i < len; ++i) h.push_back(vocab[rng.uniform_int(3)]);
      hyps.push_back(h);
      confs.push_back(rng.uniform());
    }
    CHECK(fusion::rover(hyps, VotingScheme::frequency(), &confs) ==
          fusion::rover(hyps, VotingScheme::confidence(1.0), &confs));
  }
}
