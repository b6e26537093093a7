// ensdist/data.hpp

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

#ifndef ENSDIST_DATA_HPP_
#define ENSDIST_DATA_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ensdist/io.hpp"
#include "ensdist/tensor.hpp"

namespace ensdist {
namespace data {

// Synthetic corpus description. The corpus is fully determined by
// (seed, world_seed): the world seed fixes the shared "language" (token
// prototypes, domain token distributions, domain voice bases) so that
// corpora with disjoint speakers can still be transcribed by the same
// models, while `seed` drives speakers, utterances and noise.
struct CorpusSpec {
  int num_speakers = 36;
  int utterances_per_speaker = 30;
  int vocab_size = 24;
  int domains = 3;
  double domain_skew = 0.85;   // mass a domain puts on its own token group
  double noise_sigma = 0.08;   // per-frame Gaussian feature noise
  int frames_per_token = 2;
  int feature_dim = 16;
  int min_tokens = 3;
  int max_tokens = 8;
  double voice_strength = 1.0;  // 0 = identity voices
  int segment_frames = 4;       // "one second" of frames for embeddings
  uint64_t seed = 1;
  std::optional<uint64_t> world_seed;  // derived from seed when absent
  std::string speaker_prefix = "spk";

  struct Split {
    std::string name;
    int speakers = 0;
  };
  // Optional named splits by speaker count (must sum to num_speakers);
  // manifest_<name>.jsonl is written next to the full manifest.
  std::vector<Split> splits;

  uint64_t effective_world_seed() const;
  void validate() const;  // throws ConfigError naming the offending field

  static CorpusSpec from_json_file(const std::filesystem::path& path);
};

// The shared world derived from the spec's world seed.
std::vector<std::string> vocab_tokens(const CorpusSpec& spec);
nn::Tensor token_prototypes(const CorpusSpec& spec);  // (V x F)
// Domain unigram distribution over token ids 0..V-1.
std::vector<std::vector<double>> domain_unigrams(const CorpusSpec& spec);

// Renders the corpus under out_dir: feats/*.fea plus manifest.jsonl (and
// per-split manifests when requested). Returns the full manifest.
Manifest generate_corpus(const CorpusSpec& spec,
                         const std::filesystem::path& out_dir);

struct SpeakerEmbeddingResult {
  std::vector<double> mean_embedding;
  std::vector<std::vector<double>> segment_embeddings;
};

// Per-speaker embedding: segment-statistic vectors (per-dimension mean and
// deviation over a fixed-length window) for `segments` seeded draws, plus
// their average. Segments shorter than nominal length are used whole.
SpeakerEmbeddingResult speaker_embedding(const Manifest& manifest,
                                         const std::string& speaker_id,
                                         int segment_frames,
                                         int segments = 10,
                                         uint64_t seed = 0);

struct KMeansResult {
  std::vector<int> assignments;             // 0..k-1 per point
  std::vector<std::vector<double>> centroids;
  std::vector<double> sse_history;          // per-Lloyd-iteration SSE
};

// Lloyd's algorithm with seeded farthest-point initialization; empty
// clusters are re-seeded with the point farthest from its centroid.
// Requires at least k distinct points (ClusterError otherwise).
KMeansResult kmeans(const std::vector<std::vector<double>>& points, int k,
                    uint64_t seed);

enum class DistanceMetric { kEuclidean, kCosine };

// Speaker -> expert index in {1..k}, with the partitioning method recorded.
struct Partition {
  std::map<std::string, int> assignment;
  int k = 0;
  std::string method;

  std::vector<std::string> expert_speakers(int expert_index) const;
  void validate() const;  // exact cover, every expert non-empty
  void save(const std::filesystem::path& path) const;
  static Partition load(const std::filesystem::path& path);
};

// Majority vote over each speaker's segment embeddings against fixed
// centroids; vote ties fall back to the centroid nearest the speaker's mean
// embedding.
Partition assign_speakers_by_vote(
    const std::map<std::string, SpeakerEmbeddingResult>& embeddings,
    const std::vector<std::vector<double>>& centroids,
    DistanceMetric metric = DistanceMetric::kEuclidean);

// Seeded shuffle + round robin; sizes differ by at most one.
Partition random_partition(const std::vector<std::string>& speakers, int k,
                           uint64_t seed);

// Full clustering pipeline: pooled segment embeddings -> k-means ->
// majority-vote speaker assignment.
Partition clustered_partition(const Manifest& manifest, int segment_frames,
                              int k, uint64_t seed,
                              DistanceMetric metric = DistanceMetric::kEuclidean);

}  // namespace data
}  // namespace ensdist

#endif  // ENSDIST_DATA_HPP_
