// ensdist/data.cpp

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

#include "ensdist/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>

#include "ensdist/errors.hpp"
#include "ensdist/rng.hpp"
#include "json.hpp"

namespace ensdist {
namespace data {

namespace fs = std::filesystem;

uint64_t CorpusSpec::effective_world_seed() const {
  return world_seed.has_value() ? *world_seed
                                : derive_seed(seed, "world-default");
}

void CorpusSpec::validate() const {
  auto fail = [](const std::string& field) {
    throw ConfigError("corpus spec: invalid field " + field);
  };
  if (num_speakers < 1) fail("num_speakers");
  if (utterances_per_speaker < 1) fail("utterances_per_speaker");
  if (vocab_size < 2 || vocab_size > 99) fail("vocab_size");
  if (domains < 2) fail("domains");  // no domain signal otherwise
  if (domains > vocab_size) fail("domains");
  if (domain_skew < 0.0 || domain_skew > 1.0) fail("domain_skew");
  if (noise_sigma < 0.0) fail("noise_sigma");
  if (frames_per_token < 1) fail("frames_per_token");
  if (feature_dim < 1) fail("feature_dim");
  if (min_tokens < 1) fail("min_tokens");
  if (max_tokens < min_tokens) fail("max_tokens");
  if (voice_strength < 0.0) fail("voice_strength");
  if (segment_frames < 1) fail("segment_frames");
  if (speaker_prefix.empty()) fail("speaker_prefix");
  if (!splits.empty()) {
    int total = 0;
    for (const Split& s : splits) {
      if (s.name.empty()) fail("splits.name");
      if (s.speakers < 1) fail("splits.speakers");
      total += s.speakers;
    }
    if (total != num_speakers) fail("splits (speaker counts must sum up)");
  }
}

CorpusSpec CorpusSpec::from_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("corpus spec: cannot open " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const std::exception& e) {
    throw ConfigError("corpus spec: bad JSON in " + path.string() + ": " +
                      e.what());
  }
  CorpusSpec spec;
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  get("num_speakers", spec.num_speakers);
  get("utterances_per_speaker", spec.utterances_per_speaker);
  get("vocab_size", spec.vocab_size);
  get("domains", spec.domains);
  get("domain_skew", spec.domain_skew);
  get("noise_sigma", spec.noise_sigma);
  get("frames_per_token", spec.frames_per_token);
  get("feature_dim", spec.feature_dim);
  get("min_tokens", spec.min_tokens);
  get("max_tokens", spec.max_tokens);
  get("voice_strength", spec.voice_strength);
  get("segment_frames", spec.segment_frames);
  get("seed", spec.seed);
  get("speaker_prefix", spec.speaker_prefix);
  if (j.contains("world_seed")) spec.world_seed = j.at("world_seed").get<uint64_t>();
  if (j.contains("splits")) {
    for (const auto& s : j.at("splits")) {
      spec.splits.push_back(
          {s.at("name").get<std::string>(), s.at("speakers").get<int>()});
    }
  }
  spec.validate();
  return spec;
}

std::vector<std::string> vocab_tokens(const CorpusSpec& spec) {
  std::vector<std::string> tokens;
  tokens.reserve(spec.vocab_size);
  for (int i = 0; i < spec.vocab_size; ++i) {
    char buf[8];
    std::snprintf(buf, sizeof(buf), "w%02d", i + 1);
    tokens.emplace_back(buf);
  }
  return tokens;
}

nn::Tensor token_prototypes(const CorpusSpec& spec) {
  Rng rng(derive_seed(spec.effective_world_seed(), "prototypes"));
  nn::Tensor protos(spec.vocab_size, spec.feature_dim);
  for (double& v : protos.data) v = rng.normal();
  return protos;
}

std::vector<std::vector<double>> domain_unigrams(const CorpusSpec& spec) {
  // Token i belongs to domain group i % D; a domain puts `skew` mass on its
  // own group and spreads the rest uniformly over the whole vocabulary.
  const int v = spec.vocab_size;
  const int d = spec.domains;
  std::vector<std::vector<double>> dist(d, std::vector<double>(v, 0.0));
  for (int dom = 0; dom < d; ++dom) {
    int group_size = 0;
    for (int i = 0; i < v; ++i) {
      if (i % d == dom) ++group_size;
    }
    for (int i = 0; i < v; ++i) {
      dist[dom][i] = (1.0 - spec.domain_skew) / v;
      if (i % d == dom) dist[dom][i] += spec.domain_skew / group_size;
    }
  }
  return dist;
}

namespace {

struct Voice {
  nn::Tensor transform;     // (F x F)
  std::vector<double> bias;  // F
};

struct World {
  nn::Tensor prototypes;
  std::vector<std::vector<double>> unigrams;
  // Domain-level voice bases; speakers jitter around them.
  std::vector<nn::Tensor> domain_transform;     // (F x F) deviation from I
  std::vector<std::vector<double>> domain_bias;  // F
};

World build_world(const CorpusSpec& spec) {
  World w;
  w.prototypes = token_prototypes(spec);
  w.unigrams = domain_unigrams(spec);
  const int f = spec.feature_dim;
  for (int d = 0; d < spec.domains; ++d) {
    Rng rng(derive_seed(spec.effective_world_seed(), "domain-voice", d));
    nn::Tensor g(f, f);
    for (double& v : g.data) v = rng.normal(0.0, 0.25 / std::sqrt(f));
    w.domain_transform.push_back(std::move(g));
    std::vector<double> bias(f);
    for (double& v : bias) v = rng.normal(0.0, 1.0);
    // Fixed offset magnitude per domain keeps domains separated regardless
    // of dimension.
    double norm = 0.0;
    for (double v : bias) norm += v * v;
    norm = std::sqrt(norm);
    for (double& v : bias) v = v / norm * 3.0;
    w.domain_bias.push_back(std::move(bias));
  }
  return w;
}

Voice speaker_voice(const CorpusSpec& spec, const World& world, int domain,
                    Rng& rng) {
  const int f = spec.feature_dim;
  const double s = spec.voice_strength;
  Voice voice;
  voice.transform = nn::Tensor(f, f);
  for (int i = 0; i < f; ++i) voice.transform.at(i, i) = 1.0;
  for (int i = 0; i < f * f; ++i) {
    double jitter = rng.normal(0.0, 0.06 / std::sqrt(f));
    voice.transform.data[i] +=
        s * (world.domain_transform[domain].data[i] + jitter);
  }
  voice.bias.resize(f);
  for (int i = 0; i < f; ++i) {
    voice.bias[i] =
        s * (world.domain_bias[domain][i] + rng.normal(0.0, 0.3));
  }
  return voice;
}

int sample_categorical(const std::vector<double>& dist, Rng& rng) {
  double u = rng.uniform();
  double acc = 0.0;
  for (size_t i = 0; i < dist.size(); ++i) {
    acc += dist[i];
    if (u < acc) return static_cast<int>(i);
  }
  return static_cast<int>(dist.size()) - 1;
}

double squared_distance(const std::vector<double>& a,
                        const std::vector<double>& b) {
  double acc = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

double distance(const std::vector<double>& a, const std::vector<double>& b,
                DistanceMetric metric) {
  if (metric == DistanceMetric::kEuclidean) {
    return std::sqrt(squared_distance(a, b));
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  double denom = std::sqrt(na) * std::sqrt(nb);
  if (denom == 0.0) return 1.0;
  return 1.0 - dot / denom;
}

}  // namespace

Manifest generate_corpus(const CorpusSpec& spec, const fs::path& out_dir) {
  spec.validate();
  World world = build_world(spec);
  fs::create_directories(out_dir / "feats");

  Manifest manifest;
  manifest.set_root(out_dir);
  std::vector<std::string> all_tokens = vocab_tokens(spec);

  for (int s = 0; s < spec.num_speakers; ++s) {
    char spk_buf[32];
    std::snprintf(spk_buf, sizeof(spk_buf), "%s%04d", spec.speaker_prefix.c_str(),
                  s);
    std::string speaker_id = spk_buf;
    Rng spk_rng(derive_seed(spec.seed, "speaker", static_cast<uint64_t>(s)));
    int domain = spk_rng.uniform_int(spec.domains);
    Voice voice = speaker_voice(spec, world, domain, spk_rng);

    for (int uidx = 0; uidx < spec.utterances_per_speaker; ++uidx) {
      Rng utt_rng(derive_seed(derive_seed(spec.seed, "speaker", s), "utt",
                              static_cast<uint64_t>(uidx)));
      int len = spec.min_tokens +
                utt_rng.uniform_int(spec.max_tokens - spec.min_tokens + 1);
      std::vector<int> token_ids;
      std::string ref_text;
      for (int i = 0; i < len; ++i) {
        int tok = sample_categorical(world.unigrams[domain], utt_rng);
        token_ids.push_back(tok);
        if (i > 0) ref_text += ' ';
        ref_text += all_tokens[tok];
      }

      nn::Tensor frames(len * spec.frames_per_token, spec.feature_dim);
      int row = 0;
      for (int tok : token_ids) {
        for (int rep = 0; rep < spec.frames_per_token; ++rep, ++row) {
          for (int cdim = 0; cdim < spec.feature_dim; ++cdim) {
            double acc = voice.bias[cdim];
            for (int k = 0; k < spec.feature_dim; ++k) {
              acc += voice.transform.at(cdim, k) * world.prototypes.at(tok, k);
            }
            frames.at(row, cdim) =
                acc + spec.noise_sigma * utt_rng.normal();
          }
        }
      }

      char utt_buf[48];
      std::snprintf(utt_buf, sizeof(utt_buf), "%s_u%03d", speaker_id.c_str(),
                    uidx);
      Manifest::Entry entry;
      entry.utt_id = utt_buf;
      entry.speaker_id = speaker_id;
      entry.domain_id = domain;
      entry.num_frames = frames.rows;
      entry.features_path = std::string("feats/") + utt_buf + ".fea";
      write_features(out_dir / entry.features_path, frames);
      manifest.add(std::move(entry), std::move(ref_text));
    }
  }

  manifest.save(out_dir / "manifest.jsonl");

  if (!spec.splits.empty()) {
    std::vector<std::string> speakers = manifest.speakers();
    size_t cursor = 0;
    for (const CorpusSpec::Split& split : spec.splits) {
      std::vector<std::string> keep(speakers.begin() + cursor,
                                    speakers.begin() + cursor + split.speakers);
      cursor += split.speakers;
      Manifest sub = manifest.filter_speakers(keep);
      sub.save(out_dir / ("manifest_" + split.name + ".jsonl"));
    }
  }
  return manifest;
}

SpeakerEmbeddingResult speaker_embedding(const Manifest& manifest,
                                         const std::string& speaker_id,
                                         int segment_frames, int segments,
                                         uint64_t seed) {
  std::vector<size_t> utts;
  for (size_t i = 0; i < manifest.size(); ++i) {
    if (manifest.entry(i).speaker_id == speaker_id) utts.push_back(i);
  }
  if (utts.empty()) {
    throw DataError("speaker_embedding: no utterances for " + speaker_id);
  }
  Rng rng(derive_seed(seed, "embed:" + speaker_id));
  SpeakerEmbeddingResult result;
  for (int k = 0; k < segments; ++k) {
    size_t which = utts[static_cast<size_t>(rng.uniform_int(
        static_cast<int>(utts.size())))];
    nn::Tensor frames = read_features(manifest.features_file(which));
    int max_start = std::max(0, frames.rows - segment_frames);
    int start = max_start > 0 ? rng.uniform_int(max_start + 1) : 0;
    int length = std::min(segment_frames, frames.rows - start);

    const int f = frames.cols;
    std::vector<double> emb(2 * f, 0.0);
    for (int r = start; r < start + length; ++r) {
      for (int c = 0; c < f; ++c) emb[c] += frames.at(r, c);
    }
    for (int c = 0; c < f; ++c) emb[c] /= length;
    for (int r = start; r < start + length; ++r) {
      for (int c = 0; c < f; ++c) {
        double d = frames.at(r, c) - emb[c];
        emb[f + c] += d * d;
      }
    }
    for (int c = 0; c < f; ++c) emb[f + c] = std::sqrt(emb[f + c] / length);
    result.segment_embeddings.push_back(std::move(emb));
  }
  result.mean_embedding.assign(result.segment_embeddings[0].size(), 0.0);
  for (const auto& e : result.segment_embeddings) {
    for (size_t i = 0; i < e.size(); ++i) result.mean_embedding[i] += e[i];
  }
  for (double& v : result.mean_embedding) v /= segments;
  return result;
}

KMeansResult kmeans(const std::vector<std::vector<double>>& points, int k,
                    uint64_t seed) {
  if (k < 1) throw ClusterError("kmeans: k must be positive");
  std::set<std::vector<double>> distinct(points.begin(), points.end());
  if (static_cast<int>(distinct.size()) < k) {
    throw ClusterError("kmeans: fewer than k distinct points");
  }
  const size_t n = points.size();

  // Farthest-point initialization from a seeded first pick.
  Rng rng(derive_seed(seed, "kmeans-init"));
  std::vector<std::vector<double>> centroids;
  centroids.push_back(points[static_cast<size_t>(rng.uniform_int(
      static_cast<int>(n)))]);
  while (static_cast<int>(centroids.size()) < k) {
    size_t best = 0;
    double best_d = -1.0;
    for (size_t i = 0; i < n; ++i) {
      double d = std::numeric_limits<double>::infinity();
      for (const auto& c : centroids) d = std::min(d, squared_distance(points[i], c));
      if (d > best_d) {
        best_d = d;
        best = i;
      }
    }
    centroids.push_back(points[best]);
  }

  KMeansResult result;
  result.assignments.assign(n, -1);
  for (int iter = 0; iter < 100; ++iter) {
    bool changed = false;
    for (size_t i = 0; i < n; ++i) {
      int best = 0;
      double best_d = squared_distance(points[i], centroids[0]);
      for (int c = 1; c < k; ++c) {
        double d = squared_distance(points[i], centroids[c]);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (result.assignments[i] != best) {
        result.assignments[i] = best;
        changed = true;
      }
    }

    double sse = 0.0;
    for (size_t i = 0; i < n; ++i) {
      sse += squared_distance(points[i], centroids[result.assignments[i]]);
    }
    result.sse_history.push_back(sse);
    if (!changed && result.sse_history.size() > 1) break;

    // Recompute means; re-seed any empty cluster with the point farthest
    // from its current centroid.
    std::vector<std::vector<double>> sums(
        k, std::vector<double>(points[0].size(), 0.0));
    std::vector<int> counts(k, 0);
    for (size_t i = 0; i < n; ++i) {
      ++counts[result.assignments[i]];
      for (size_t d = 0; d < points[i].size(); ++d) {
        sums[result.assignments[i]][d] += points[i][d];
      }
    }
    for (int c = 0; c < k; ++c) {
      if (counts[c] > 0) {
        for (double& v : sums[c]) v /= counts[c];
        centroids[c] = sums[c];
      } else {
        size_t far = 0;
        double far_d = -1.0;
        for (size_t i = 0; i < n; ++i) {
          double d = squared_distance(points[i],
                                      centroids[result.assignments[i]]);
          if (d > far_d) {
            far_d = d;
            far = i;
          }
        }
        centroids[c] = points[far];
      }
    }
  }
  result.centroids = std::move(centroids);
  return result;
}

std::vector<std::string> Partition::expert_speakers(int expert_index) const {
  std::vector<std::string> out;
  for (const auto& [spk, idx] : assignment) {
    if (idx == expert_index) out.push_back(spk);
  }
  return out;
}

void Partition::validate() const {
  if (k < 1) throw ClusterError("partition: k must be positive");
  std::vector<int> counts(k, 0);
  for (const auto& [spk, idx] : assignment) {
    if (idx < 1 || idx > k) {
      throw ClusterError("partition: expert index out of range for " + spk);
    }
    ++counts[idx - 1];
  }
  for (int c = 0; c < k; ++c) {
    if (counts[c] == 0) {
      throw ClusterError("partition: expert " + std::to_string(c + 1) +
                         " has no speakers");
    }
  }
}

void Partition::save(const fs::path& path) const {
  nlohmann::ordered_json j;
  j["method"] = method;
  j["k"] = k;
  nlohmann::ordered_json a = nlohmann::ordered_json::object();
  for (const auto& [spk, idx] : assignment) a[spk] = idx;
  j["assignments"] = std::move(a);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("partition: cannot write " + path.string());
  out << j.dump(2) << '\n';
}

Partition Partition::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("partition: cannot open " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const std::exception& e) {
    throw IoError("partition: bad JSON in " + path.string() + ": " + e.what());
  }
  Partition p;
  p.method = j.at("method").get<std::string>();
  p.k = j.at("k").get<int>();
  for (const auto& [spk, idx] : j.at("assignments").items()) {
    p.assignment[spk] = idx.get<int>();
  }
  p.validate();
  return p;
}

Partition assign_speakers_by_vote(
    const std::map<std::string, SpeakerEmbeddingResult>& embeddings,
    const std::vector<std::vector<double>>& centroids, DistanceMetric metric) {
  Partition partition;
  partition.k = static_cast<int>(centroids.size());
  partition.method = "clustered";
  for (const auto& [speaker, emb] : embeddings) {
    std::vector<int> votes(centroids.size(), 0);
    for (const auto& segment : emb.segment_embeddings) {
      int best = 0;
      double best_d = distance(segment, centroids[0], metric);
      for (size_t c = 1; c < centroids.size(); ++c) {
        double d = distance(segment, centroids[c], metric);
        if (d < best_d) {
          best_d = d;
          best = static_cast<int>(c);
        }
      }
      ++votes[best];
    }
    int winner = 0;
    bool tie = false;
    for (size_t c = 1; c < votes.size(); ++c) {
      if (votes[c] > votes[winner]) {
        winner = static_cast<int>(c);
        tie = false;
      } else if (votes[c] == votes[winner]) {
        tie = true;
      }
    }
    if (tie) {
      // Resolve by the centroid nearest the mean embedding, restricted to
      // the tied clusters.
      int best = -1;
      double best_d = std::numeric_limits<double>::infinity();
      for (size_t c = 0; c < centroids.size(); ++c) {
        if (votes[c] != votes[winner]) continue;
        double d = distance(emb.mean_embedding, centroids[c], metric);
        if (d < best_d) {
          best_d = d;
          best = static_cast<int>(c);
        }
      }
      winner = best;
    }
    partition.assignment[speaker] = winner + 1;
  }
  return partition;
}

Partition random_partition(const std::vector<std::string>& speakers, int k,
                           uint64_t seed) {
  if (static_cast<int>(speakers.size()) < k) {
    throw ClusterError("random_partition: fewer speakers than experts");
  }
  std::vector<std::string> shuffled = speakers;
  std::sort(shuffled.begin(), shuffled.end());
  Rng rng(derive_seed(seed, "random-partition"));
  rng.shuffle(shuffled);
  Partition partition;
  partition.k = k;
  partition.method = "random";
  for (size_t i = 0; i < shuffled.size(); ++i) {
    partition.assignment[shuffled[i]] = static_cast<int>(i % k) + 1;
  }
  return partition;
}

Partition clustered_partition(const Manifest& manifest, int segment_frames,
                              int k, uint64_t seed, DistanceMetric metric) {
  std::map<std::string, SpeakerEmbeddingResult> embeddings;
  std::vector<std::vector<double>> pooled;
  for (const std::string& speaker : manifest.speakers()) {
    SpeakerEmbeddingResult emb =
        speaker_embedding(manifest, speaker, segment_frames, 10, seed);
    pooled.insert(pooled.end(), emb.segment_embeddings.begin(),
                  emb.segment_embeddings.end());
    embeddings.emplace(speaker, std::move(emb));
  }
  KMeansResult km = kmeans(pooled, k, seed);
  Partition partition = assign_speakers_by_vote(embeddings, km.centroids,
                                                metric);
  partition.validate();
  return partition;
}

}  // namespace data
}  // namespace ensdist
