// ensdist/experiment.cpp

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

#include "ensdist/experiment.hpp"

#include <atomic>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <thread>

#include "ensdist/checkpoint.hpp"
#include "ensdist/confidence.hpp"
#include "ensdist/decode.hpp"
#include "ensdist/errors.hpp"
#include "ensdist/fusion.hpp"
#include "ensdist/metrics.hpp"
#include "ensdist/rnnt.hpp"
#include "ensdist/rng.hpp"
#include "ensdist/weighting.hpp"
#include "json.hpp"

namespace ensdist {
namespace experiment {

namespace fs = std::filesystem;

Policy policy_from_string(const std::string& name) {
  if (name == "best_expert") return Policy::kBestExpert;
  if (name == "all_experts") return Policy::kAllExperts;
  if (name == "rover") return Policy::kRover;
  if (name == "smart_weighter") return Policy::kSmartWeighter;
  if (name == "oracle") return Policy::kOracle;
  throw ConfigError("unknown policy: " + name);
}

std::string policy_name(Policy policy) {
  switch (policy) {
    case Policy::kBestExpert: return "best_expert";
    case Policy::kAllExperts: return "all_experts";
    case Policy::kRover: return "rover";
    case Policy::kSmartWeighter: return "smart_weighter";
    case Policy::kOracle: return "oracle";
  }
  return "?";
}

namespace {

// Work items fan out to threads but results land in index order, so thread
// count never changes outputs.
template <typename Fn>
void parallel_for(int n, int threads, const Fn& fn) {
  if (threads <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  int workers = std::min(threads, n);
  for (int t = 0; t < workers; ++t) {
    pool.emplace_back([&] {
      for (int i; (i = next.fetch_add(1)) < n;) {
        try {
          fn(i);
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
}

fusion::VotingScheme parse_rover_scheme(const std::string& scheme) {
  if (scheme == "frequency") return fusion::VotingScheme::frequency();
  const std::string prefix = "confidence:";
  if (scheme.rfind(prefix, 0) == 0) {
    double alpha = std::stod(scheme.substr(prefix.size()));
    if (alpha < 0.0 || alpha > 1.0) {
      throw ConfigError("rover scheme alpha must be in [0,1]");
    }
    return fusion::VotingScheme::confidence(alpha);
  }
  throw ConfigError("unknown rover scheme: " + scheme);
}

uint64_t fnv1a(const std::string& s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string format4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

}  // namespace

// ---------------------------------------------------------------------------
// Config

ExperimentConfig ExperimentConfig::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("config: cannot open " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const std::exception& e) {
    throw ConfigError("config: bad JSON in " + path.string() + ": " + e.what());
  }

  ExperimentConfig cfg;
  auto get = [](const nlohmann::json& obj, const char* key, auto& field) {
    if (obj.contains(key)) {
      field = obj.at(key).get<std::decay_t<decltype(field)>>();
    }
  };

  if (j.contains("world")) {
    const auto& w = j.at("world");
    get(w, "vocab_size", cfg.world.vocab_size);
    get(w, "domains", cfg.world.domains);
    get(w, "domain_skew", cfg.world.domain_skew);
    get(w, "noise_sigma", cfg.world.noise_sigma);
    get(w, "frames_per_token", cfg.world.frames_per_token);
    get(w, "feature_dim", cfg.world.feature_dim);
    get(w, "min_tokens", cfg.world.min_tokens);
    get(w, "max_tokens", cfg.world.max_tokens);
    get(w, "voice_strength", cfg.world.voice_strength);
    get(w, "segment_frames", cfg.world.segment_frames);
    if (w.contains("world_seed")) {
      cfg.world.world_seed = w.at("world_seed").get<uint64_t>();
    }
  }
  if (j.contains("teacher_pool")) {
    const auto& t = j.at("teacher_pool");
    get(t, "speakers", cfg.teacher_speakers);
    get(t, "utterances_per_speaker", cfg.teacher_utterances);
    get(t, "seed", cfg.teacher_seed);
    get(t, "weighter_speakers", cfg.weighter_speakers);
  }
  if (j.contains("student_pool")) {
    const auto& s = j.at("student_pool");
    get(s, "speakers", cfg.student_speakers);
    get(s, "utterances_per_speaker", cfg.student_utterances);
    get(s, "seed", cfg.student_seed);
    get(s, "dev_speakers", cfg.dev_speakers);
    get(s, "eval_speakers", cfg.eval_speakers);
  }
  get(j, "partition_method", cfg.partition_method);
  if (j.contains("experts")) {
    const auto& e = j.at("experts");
    get(e, "count", cfg.num_experts);
    get(e, "train_steps", cfg.expert_train_steps);
    get(e, "learning_rate", cfg.expert_learning_rate);
  }
  if (j.contains("student")) {
    const auto& s = j.at("student");
    get(s, "train_steps", cfg.student_train_steps);
    get(s, "learning_rate", cfg.student_learning_rate);
    get(s, "temperature", cfg.temperature);
    if (s.contains("policy")) {
      cfg.policy = policy_from_string(s.at("policy").get<std::string>());
    }
  }
  if (j.contains("weighter")) {
    const auto& w = j.at("weighter");
    get(w, "train_steps", cfg.weighter_train_steps);
    get(w, "learning_rate", cfg.weighter_learning_rate);
    get(w, "batch_size", cfg.weighter_batch_size);
    get(w, "position_randomization", cfg.position_randomization);
    get(w, "use_entropy", cfg.use_entropy);
    get(w, "pooling", cfg.weighter_pooling);
    get(w, "hidden", cfg.weighter_hidden);
    get(w, "embed_dim", cfg.weighter_embed_dim);
    get(w, "attention_heads", cfg.attention_heads);
    get(w, "head_hidden", cfg.head_hidden);
  }
  if (j.contains("model")) {
    const auto& m = j.at("model");
    get(m, "encoder_layers", cfg.encoder_layers);
    get(m, "hidden", cfg.hidden);
    get(m, "predictor_layers", cfg.predictor_layers);
    get(m, "embed_dim", cfg.embed_dim);
    get(m, "joiner_hidden", cfg.joiner_hidden);
  }
  if (j.contains("decode")) {
    const auto& d = j.at("decode");
    get(d, "nbest", cfg.nbest);
    get(d, "beam_width", cfg.beam_width);
    get(d, "max_emits_per_frame", cfg.max_emits_per_frame);
  }
  get(j, "rover_scheme", cfg.rover_scheme);
  get(j, "seed", cfg.seed);
  get(j, "threads", cfg.threads);
  cfg.validate();
  return cfg;
}

void ExperimentConfig::validate() const {
  world.validate();
  if (num_experts < 2) {
    throw ConfigError("config: experts.count must be at least 2");
  }
  if (teacher_speakers < num_experts + weighter_speakers) {
    throw ConfigError(
        "config: teacher_pool.speakers too small for the expert splits plus "
        "the weighter subset");
  }
  if (weighter_speakers < 1) {
    throw ConfigError("config: teacher_pool.weighter_speakers must be >= 1");
  }
  if (student_speakers < dev_speakers + eval_speakers + 1) {
    throw ConfigError("config: student_pool.speakers too small for dev/eval");
  }
  if (partition_method != "clustered" && partition_method != "random") {
    throw ConfigError("config: partition_method must be clustered or random");
  }
  if (weighter_pooling != "segment_mean" && weighter_pooling != "global_mean") {
    throw ConfigError("config: weighter.pooling must be segment_mean or "
                      "global_mean");
  }
  if (temperature <= 0.0) {
    throw ConfigError("config: student.temperature must be > 0");
  }
  if (nbest < 1 || beam_width < 1 || max_emits_per_frame < 1) {
    throw ConfigError("config: decode parameters must be positive");
  }
  if (expert_train_steps < 1 || student_train_steps < 1 ||
      weighter_train_steps < 1) {
    throw ConfigError("config: step budgets must be positive");
  }
  if (threads < 1) throw ConfigError("config: threads must be >= 1");
  parse_rover_scheme(rover_scheme);
}

data::CorpusSpec ExperimentConfig::teacher_corpus_spec() const {
  data::CorpusSpec spec = world;
  spec.num_speakers = teacher_speakers;
  spec.utterances_per_speaker = teacher_utterances;
  spec.seed = teacher_seed;
  spec.world_seed = world.effective_world_seed();
  spec.speaker_prefix = "spk";
  spec.splits = {{"expert_train", teacher_speakers - weighter_speakers},
                 {"weighter_train", weighter_speakers}};
  return spec;
}

data::CorpusSpec ExperimentConfig::student_corpus_spec() const {
  data::CorpusSpec spec = world;
  spec.num_speakers = student_speakers;
  spec.utterances_per_speaker = student_utterances;
  spec.seed = student_seed;
  spec.world_seed = world.effective_world_seed();
  spec.speaker_prefix = "stu";
  spec.splits = {{"student_train",
                  student_speakers - dev_speakers - eval_speakers},
                 {"dev", dev_speakers},
                 {"eval", eval_speakers}};
  return spec;
}

nn::TransducerConfig ExperimentConfig::transducer_config() const {
  nn::TransducerConfig cfg;
  cfg.feature_dim = world.feature_dim;
  cfg.vocab_size = world.vocab_size;
  cfg.encoder_layers = encoder_layers;
  cfg.hidden = hidden;
  cfg.predictor_layers = predictor_layers;
  cfg.embed_dim = embed_dim;
  cfg.joiner_hidden = joiner_hidden;
  return cfg;
}

nn::WeighterConfig ExperimentConfig::weighter_config() const {
  nn::WeighterConfig cfg;
  cfg.feature_dim = world.feature_dim;
  cfg.num_experts = num_experts;
  cfg.vocab_size = world.vocab_size;
  cfg.hidden = weighter_hidden;
  cfg.embed_dim = weighter_embed_dim;
  cfg.attention_heads = attention_heads;
  cfg.head_hidden = head_hidden;
  cfg.use_entropy = use_entropy;
  cfg.pooling = weighter_pooling == "segment_mean"
                    ? nn::WeighterConfig::Pooling::kSegmentMean
                    : nn::WeighterConfig::Pooling::kGlobalMean;
  return cfg;
}

nn::DecodeConfig ExperimentConfig::decode_config() const {
  nn::DecodeConfig cfg;
  cfg.beam_width = beam_width;
  cfg.max_emits_per_frame = max_emits_per_frame;
  return cfg;
}

std::string ExperimentConfig::canonical_json() const {
  nlohmann::json j;  // nlohmann objects serialize with sorted keys
  j["world"] = {{"vocab_size", world.vocab_size},
                {"domains", world.domains},
                {"domain_skew", world.domain_skew},
                {"noise_sigma", world.noise_sigma},
                {"frames_per_token", world.frames_per_token},
                {"feature_dim", world.feature_dim},
                {"min_tokens", world.min_tokens},
                {"max_tokens", world.max_tokens},
                {"voice_strength", world.voice_strength},
                {"segment_frames", world.segment_frames},
                {"world_seed", world.effective_world_seed()}};
  j["teacher_pool"] = {{"speakers", teacher_speakers},
                       {"utterances_per_speaker", teacher_utterances},
                       {"seed", teacher_seed},
                       {"weighter_speakers", weighter_speakers}};
  j["student_pool"] = {{"speakers", student_speakers},
                       {"utterances_per_speaker", student_utterances},
                       {"seed", student_seed},
                       {"dev_speakers", dev_speakers},
                       {"eval_speakers", eval_speakers}};
  j["partition_method"] = partition_method;
  j["experts"] = {{"count", num_experts},
                  {"train_steps", expert_train_steps},
                  {"learning_rate", expert_learning_rate}};
  j["student"] = {{"train_steps", student_train_steps},
                  {"learning_rate", student_learning_rate},
                  {"temperature", temperature},
                  {"policy", policy_name(policy)}};
  j["weighter"] = {{"train_steps", weighter_train_steps},
                   {"learning_rate", weighter_learning_rate},
                   {"batch_size", weighter_batch_size},
                   {"position_randomization", position_randomization},
                   {"use_entropy", use_entropy},
                   {"pooling", weighter_pooling},
                   {"hidden", weighter_hidden},
                   {"embed_dim", weighter_embed_dim},
                   {"attention_heads", attention_heads},
                   {"head_hidden", head_hidden}};
  j["model"] = {{"encoder_layers", encoder_layers},
                {"hidden", hidden},
                {"predictor_layers", predictor_layers},
                {"embed_dim", embed_dim},
                {"joiner_hidden", joiner_hidden}};
  j["decode"] = {{"nbest", nbest},
                 {"beam_width", beam_width},
                 {"max_emits_per_frame", max_emits_per_frame}};
  j["rover_scheme"] = rover_scheme;
  j["seed"] = seed;
  j["threads"] = threads;
  return j.dump();
}

std::string ExperimentConfig::config_hash() const {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016" PRIx64, fnv1a(canonical_json()));
  return buf;
}

// ---------------------------------------------------------------------------
// Reports

std::string MetricsReport::csv_string() const {
  std::string out = "split,model,wer,accuracy,weighted_wer\n";
  for (const Row& r : rows) {
    out += r.split + "," + r.model + ",";
    out += r.wer ? format4(*r.wer) : "";
    out += ",";
    out += r.accuracy ? format4(*r.accuracy) : "";
    out += ",";
    out += r.weighted_wer ? format4(*r.weighted_wer) : "";
    out += "\n";
  }
  return out;
}

void MetricsReport::save_csv(const fs::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("report: cannot write " + path.string());
  out << csv_string();
}

void MetricsReport::save_json(const fs::path& path) const {
  nlohmann::ordered_json j;
  j["policy"] = policy;
  j["seed"] = seed;
  j["config_hash"] = config_hash;
  nlohmann::ordered_json rows_json = nlohmann::ordered_json::array();
  for (const Row& r : rows) {
    nlohmann::ordered_json row;
    row["split"] = r.split;
    row["model"] = r.model;
    if (r.wer) row["wer"] = *r.wer;
    if (r.accuracy) row["accuracy"] = *r.accuracy;
    if (r.weighted_wer) row["weighted_wer"] = *r.weighted_wer;
    rows_json.push_back(std::move(row));
  }
  j["rows"] = std::move(rows_json);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("report: cannot write " + path.string());
  out << j.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Shared loading helpers

namespace {

struct LoadedUtterance {
  std::string utt_id;
  nn::Tensor features;
};

std::vector<LoadedUtterance> load_features(const data::Manifest& manifest) {
  std::vector<LoadedUtterance> out(manifest.size());
  for (size_t i = 0; i < manifest.size(); ++i) {
    fs::path fpath = manifest.features_file(i);
    if (!fs::exists(fpath)) {
      throw IoError("missing features file for " + manifest.entry(i).utt_id +
                    ": " + fpath.string());
    }
    out[i] = {manifest.entry(i).utt_id, data::read_features(fpath)};
  }
  return out;
}

// Per-utterance view over the K expert n-best files.
struct ExpertDecodes {
  // [utterance][expert]
  std::vector<std::vector<confidence::NBestList>> lists;
};

ExpertDecodes load_expert_decodes(const data::Manifest& manifest,
                                  const std::vector<fs::path>& nbest_files) {
  ExpertDecodes out;
  out.lists.assign(manifest.size(), {});
  std::map<std::string, size_t> index;
  for (size_t i = 0; i < manifest.size(); ++i) {
    index[manifest.entry(i).utt_id] = i;
    out.lists[i].resize(nbest_files.size());
  }
  for (size_t e = 0; e < nbest_files.size(); ++e) {
    auto lists = data::read_nbest_file(nbest_files[e]);
    std::map<std::string, bool> seen;
    for (auto& nb : lists) {
      auto it = index.find(nb.utt_id);
      if (it == index.end()) continue;  // decode may cover a superset
      out.lists[it->second][e] = std::move(nb);
      seen[it->first] = true;
    }
    for (size_t i = 0; i < manifest.size(); ++i) {
      if (out.lists[i][e].entries.empty()) {
        throw IoError("nbest file " + nbest_files[e].string() +
                      " does not cover " + manifest.entry(i).utt_id);
      }
    }
  }
  return out;
}

void check_finite_loss(double loss, const std::string& where, int64_t step) {
  if (!std::isfinite(loss)) {
    throw NumericError(where + ": non-finite loss at step " +
                       std::to_string(step));
  }
}

void log_line(std::ostream* log, const std::string& line) {
  if (log != nullptr) (*log) << line << '\n';
}

}  // namespace

// ---------------------------------------------------------------------------
// Stages

ExpertTrainResult train_experts(const ExperimentConfig& config,
                                const data::Manifest& expert_train,
                                const data::Partition& partition,
                                const fs::path& out_dir, std::ostream* log) {
  if (partition.k != config.num_experts) {
    throw ConfigError("train_experts: partition k does not match expert count");
  }
  fs::create_directories(out_dir);
  std::vector<std::string> vocab = data::vocab_tokens(config.world);

  ExpertTrainResult result;
  for (int e = 1; e <= config.num_experts; ++e) {
    data::Manifest split =
        expert_train.filter_speakers(partition.expert_speakers(e));
    if (split.empty()) {
      throw ConfigError("train_experts: expert " + std::to_string(e) +
                        " has an empty split");
    }
    auto features = load_features(split);
    std::vector<std::vector<int>> targets(split.size());
    nn::TransducerModel probe(config.transducer_config(), vocab, 0);
    for (size_t i = 0; i < split.size(); ++i) {
      targets[i] = probe.to_ids(metrics::tokenize(split.ref_text(i)));
    }

    nn::TransducerModel model(
        config.transducer_config(), vocab,
        derive_seed(config.seed, "expert", static_cast<uint64_t>(e)));
    nn::AdamConfig adam_cfg;
    adam_cfg.learning_rate = config.expert_learning_rate;
    nn::Adam adam(adam_cfg);
    Rng order_rng(derive_seed(config.seed, "expert-order",
                              static_cast<uint64_t>(e)));
    std::vector<size_t> order(split.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    size_t cursor = order.size();

    std::vector<double> curve;
    curve.reserve(config.expert_train_steps);
    for (int step = 1; step <= config.expert_train_steps; ++step) {
      if (cursor >= order.size()) {
        order_rng.shuffle(order);
        cursor = 0;
      }
      size_t u = order[cursor++];
      model.params().zero_grads();
      auto loss = rnnt::weighted_multi_teacher_loss(
          model, features[u].features, {targets[u]}, {1.0}, /*train=*/true);
      check_finite_loss(loss.total, "train_experts", step);
      adam.step(model.params());
      curve.push_back(loss.total);
      if (log != nullptr && step % 500 == 0) {
        double recent = 0.0;
        for (int k = 0; k < 100; ++k) recent += curve[curve.size() - 1 - k];
        log_line(log, "expert" + std::to_string(e) + " step " +
                          std::to_string(step) + " loss " +
                          format4(recent / 100.0));
      }
    }
    model.set_step(config.expert_train_steps);
    fs::path ckpt = out_dir / ("expert" + std::to_string(e) + ".ckpt");
    nn::save_checkpoint(ckpt, model);
    result.checkpoints.push_back(ckpt);
    result.loss_curves.push_back(std::move(curve));
  }
  return result;
}

std::vector<fs::path> decode_experts(const ExperimentConfig& config,
                                     const std::vector<fs::path>& checkpoints,
                                     const data::Manifest& manifest,
                                     const fs::path& out_dir,
                                     std::ostream* log) {
  fs::create_directories(out_dir);
  auto features = load_features(manifest);
  std::vector<fs::path> outputs;
  for (size_t e = 0; e < checkpoints.size(); ++e) {
    nn::TransducerModel model = nn::load_transducer(checkpoints[e]);
    std::string expert_id = "expert" + std::to_string(e + 1);
    std::vector<confidence::NBestList> lists(manifest.size());
    parallel_for(
        static_cast<int>(manifest.size()), config.threads, [&](int i) {
          auto hyps = nn::nbest_decode(model, features[i].features,
                                       config.nbest, config.decode_config());
          confidence::NBestList nb;
          nb.utt_id = manifest.entry(i).utt_id;
          nb.expert_id = expert_id;
          for (const auto& h : hyps) {
            nb.entries.push_back({model.to_tokens(h.tokens), h.score});
          }
          lists[i] = std::move(nb);
        });
    fs::path out = out_dir / (expert_id + ".nbest.jsonl");
    data::write_nbest_file(out, lists);
    outputs.push_back(out);
    log_line(log, "decoded " + std::to_string(manifest.size()) +
                      " utterances with " + expert_id);
  }
  return outputs;
}

WeighterTrainResult train_weighter(const ExperimentConfig& config,
                                   const data::Manifest& labeled,
                                   const std::vector<fs::path>& nbest_files,
                                   const fs::path& out_path, std::ostream* log,
                                   std::optional<bool> use_entropy_override) {
  if (static_cast<int>(nbest_files.size()) != config.num_experts) {
    throw ConfigError("train_weighter: need one n-best file per expert");
  }
  if (labeled.empty()) {
    throw EmptySetError("train_weighter: empty labeled manifest");
  }
  nn::WeighterConfig wcfg = config.weighter_config();
  if (use_entropy_override.has_value()) {
    wcfg.use_entropy = *use_entropy_override;
  }
  std::vector<std::string> vocab = data::vocab_tokens(config.world);
  nn::WeighterModel model(wcfg, vocab,
                          derive_seed(config.seed, "weighter"));

  auto features = load_features(labeled);
  ExpertDecodes decodes = load_expert_decodes(labeled, nbest_files);

  struct Example {
    std::vector<std::vector<int>> transcripts;
    std::vector<double> entropies;
    metrics::SupervisionTarget z;
  };
  std::vector<Example> examples(labeled.size());
  for (size_t i = 0; i < labeled.size(); ++i) {
    Example& ex = examples[i];
    std::vector<metrics::TokenSequence> texts;
    for (int e = 0; e < config.num_experts; ++e) {
      const auto& nb = decodes.lists[i][e];
      texts.push_back(nb.entries[0].text);
      ex.transcripts.push_back(model.to_ids(nb.entries[0].text));
      ex.entropies.push_back(confidence::entropy(nb));
    }
    ex.z = metrics::best_expert_labels(metrics::tokenize(labeled.ref_text(i)),
                                       texts);
  }

  nn::AdamConfig adam_cfg;
  adam_cfg.learning_rate = config.weighter_learning_rate;
  nn::Adam adam(adam_cfg);
  Rng order_rng(derive_seed(config.seed, "weighter-order"));
  Rng perm_rng(derive_seed(config.seed, "weighter-perm"));
  std::vector<size_t> order(examples.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  size_t cursor = order.size();

  auto train_accuracy = [&]() {
    int hits = 0;
    for (const Example& ex : examples) {
      auto w = model.forward_numeric(
          features[&ex - examples.data()].features, ex.transcripts,
          wcfg.use_entropy ? &ex.entropies : nullptr);
      size_t argmax = 0;
      for (size_t k = 1; k < w.size(); ++k) {
        if (w[k] > w[argmax]) argmax = k;
      }
      if (ex.z[argmax] == 1) ++hits;
    }
    return static_cast<double>(hits) / examples.size();
  };

  WeighterTrainResult result;
  const int batch = std::max(1, config.weighter_batch_size);
  for (int step = 1; step <= config.weighter_train_steps; ++step) {
    model.params().zero_grads();
    double batch_loss = 0.0;
    for (int b = 0; b < batch; ++b) {
      if (cursor >= order.size()) {
        order_rng.shuffle(order);
        cursor = 0;
      }
      const Example& ex = examples[order[cursor]];
      const nn::Tensor& feats = features[order[cursor]].features;
      ++cursor;

      // Shuffle expert positions (with matching targets) so the gate cannot
      // learn an index shortcut.
      std::vector<int> perm(config.num_experts);
      for (int k = 0; k < config.num_experts; ++k) perm[k] = k;
      if (config.position_randomization) perm_rng.shuffle(perm);
      std::vector<std::vector<int>> transcripts(config.num_experts);
      std::vector<double> entropies(config.num_experts);
      metrics::SupervisionTarget z(config.num_experts);
      for (int k = 0; k < config.num_experts; ++k) {
        transcripts[k] = ex.transcripts[perm[k]];
        entropies[k] = ex.entropies[perm[k]];
        z[k] = ex.z[perm[k]];
      }

      nn::Tape tape;
      auto bound = model.bind(tape, true);
      int out = model.forward(tape, bound, feats, transcripts,
                              wcfg.use_entropy ? &entropies : nullptr);
      const nn::Tensor& w = tape.value(out);
      auto bce = weighting::bce_loss({w.data.begin(), w.data.end()}, z);
      batch_loss += bce.loss;
      for (double& g : bce.grad) g /= batch;  // mean loss over the batch
      tape.backward(out, nn::Tensor::row_vector(bce.grad));
      model.accumulate_grads(tape, bound);
    }
    check_finite_loss(batch_loss, "train_weighter", step);
    adam.step(model.params());

    if (step % 50 == 0 || step == config.weighter_train_steps) {
      double acc = train_accuracy();
      result.accuracy_trajectory.push_back(acc);
      log_line(log, "weighter step " + std::to_string(step) + " loss " +
                        format4(batch_loss / batch) + " train-acc " +
                        format4(acc));
    }
  }
  result.final_train_accuracy = result.accuracy_trajectory.empty()
                                    ? 0.0
                                    : result.accuracy_trajectory.back();
  model.set_step(config.weighter_train_steps);
  nn::save_checkpoint(out_path, model);
  result.checkpoint = out_path;
  return result;
}

StudentTrainResult train_student(const ExperimentConfig& config, Policy policy,
                                 const data::Manifest& unlabeled,
                                 const StudentInputs& inputs,
                                 const fs::path& out_path, std::ostream* log) {
  if (static_cast<int>(inputs.nbest_files.size()) != config.num_experts) {
    throw ConfigError("train_student: need one n-best file per expert");
  }
  if (policy == Policy::kSmartWeighter && !inputs.weighter_checkpoint) {
    throw ConfigError(
        "train_student: smart_weighter policy requires a weighter checkpoint");
  }
  if (policy == Policy::kBestExpert && !inputs.dev_wer_table) {
    throw ConfigError(
        "train_student: best_expert policy requires a validation WER table");
  }

  // Ground truth is reachable only under the Oracle policy; other policies
  // operate on a manifest whose reference guard throws on contact.
  data::Manifest manifest = unlabeled;
  manifest.set_ref_access(policy == Policy::kOracle);

  std::vector<std::string> vocab = data::vocab_tokens(config.world);
  auto features = load_features(manifest);
  ExpertDecodes decodes = load_expert_decodes(manifest, inputs.nbest_files);

  std::optional<nn::WeighterModel> weighter;
  if (policy == Policy::kSmartWeighter) {
    weighter = nn::load_weighter(*inputs.weighter_checkpoint);
    if (weighter->config().num_experts != config.num_experts) {
      throw ConfigError("train_student: weighter expert count mismatch");
    }
  }

  nn::TransducerModel model(config.transducer_config(), vocab,
                            derive_seed(config.seed, "student"));

  // Supervision is static per utterance (it depends only on the audio and
  // the fixed expert transcripts), so teachers and weights are resolved once
  // up front; zero-weight teachers are dropped.
  struct Supervision {
    std::vector<std::vector<int>> teachers;
    std::vector<double> weights;  // aligned with `teachers`, zeros dropped
    std::vector<double> record;   // full per-expert vector, for the records
  };
  std::vector<Supervision> supervision(manifest.size());
  fusion::VotingScheme scheme = parse_rover_scheme(config.rover_scheme);
  for (size_t i = 0; i < manifest.size(); ++i) {
    std::vector<metrics::TokenSequence> texts;
    std::vector<std::vector<int>> ids;
    std::vector<double> top_scores;
    std::vector<double> entropies;
    for (int e = 0; e < config.num_experts; ++e) {
      const auto& nb = decodes.lists[i][e];
      texts.push_back(nb.entries[0].text);
      ids.push_back(model.to_ids(nb.entries[0].text));
      top_scores.push_back(nb.entries[0].score);
      entropies.push_back(confidence::entropy(nb));
    }

    weighting::WeightVector w;
    switch (policy) {
      case Policy::kAllExperts:
        w = weighting::uniform_weights(config.num_experts);
        break;
      case Policy::kBestExpert:
        w = weighting::best_expert_weights(*inputs.dev_wer_table);
        break;
      case Policy::kOracle:
        w = weighting::oracle_weights(
            metrics::tokenize(manifest.ref_text(i)), texts);
        break;
      case Policy::kSmartWeighter: {
        auto raw = weighter->forward_numeric(
            features[i].features, ids,
            weighter->config().use_entropy ? &entropies : nullptr);
        w = weighting::temperature_renormalize(raw, config.temperature);
        break;
      }
      case Policy::kRover: {
        auto fused = fusion::rover(texts, scheme, &top_scores);
        supervision[i].teachers = {model.to_ids(fused)};
        supervision[i].weights = {1.0};
        supervision[i].record = {1.0};  // single fused teacher
        break;
      }
    }
    if (policy != Policy::kRover) {
      supervision[i].record = w;
      for (int e = 0; e < config.num_experts; ++e) {
        if (w[e] != 0.0) {
          supervision[i].teachers.push_back(ids[e]);
          supervision[i].weights.push_back(w[e]);
        }
      }
    }
  }

  // Supervision records: the per-utterance weights actually used, one JSONL
  // line {utt_id, weights, policy} next to the checkpoint.
  {
    fs::path sup_path = out_path;
    sup_path += ".supervision.jsonl";
    std::ofstream sup(sup_path, std::ios::binary);
    if (!sup) throw IoError("train_student: cannot write " + sup_path.string());
    for (size_t i = 0; i < manifest.size(); ++i) {
      nlohmann::ordered_json j;
      j["utt_id"] = manifest.entry(i).utt_id;
      j["weights"] = supervision[i].record;
      j["policy"] = policy_name(policy);
      sup << j.dump() << '\n';
    }
  }

  nn::AdamConfig adam_cfg;
  adam_cfg.learning_rate = config.student_learning_rate;
  nn::Adam adam(adam_cfg);
  Rng order_rng(derive_seed(config.seed, "student-order"));
  std::vector<size_t> order(manifest.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  size_t cursor = order.size();

  StudentTrainResult result;
  result.loss_curve.reserve(config.student_train_steps);
  for (int step = 1; step <= config.student_train_steps; ++step) {
    if (cursor >= order.size()) {
      order_rng.shuffle(order);
      cursor = 0;
    }
    size_t u = order[cursor++];
    model.params().zero_grads();
    auto loss = rnnt::weighted_multi_teacher_loss(
        model, features[u].features, supervision[u].teachers,
        supervision[u].weights, /*train=*/true, config.threads);
    check_finite_loss(loss.total, "train_student", step);
    adam.step(model.params());
    result.loss_curve.push_back(loss.total);
    if (log != nullptr && step % 500 == 0) {
      double recent = 0.0;
      for (int k = 0; k < 100; ++k) {
        recent += result.loss_curve[result.loss_curve.size() - 1 - k];
      }
      log_line(log, "student(" + policy_name(policy) + ") step " +
                        std::to_string(step) + " loss " +
                        format4(recent / 100.0));
    }
  }
  model.set_step(config.student_train_steps);
  nn::save_checkpoint(out_path, model);
  result.checkpoint = out_path;
  return result;
}

namespace {

struct PooledWer {
  int64_t errors = 0;
  int64_t ref_len = 0;
  double value() const {
    return ref_len == 0 ? 0.0
                        : static_cast<double>(errors) /
                              static_cast<double>(ref_len);
  }
};

PooledWer pooled_model_wer(const ExperimentConfig& config,
                           const nn::TransducerModel& model,
                           const data::Manifest& manifest,
                           const std::vector<LoadedUtterance>& features) {
  std::vector<metrics::TokenSequence> hyps(manifest.size());
  parallel_for(static_cast<int>(manifest.size()), config.threads, [&](int i) {
    auto tokens =
        nn::greedy_decode(model, features[i].features, config.decode_config());
    hyps[i] = model.to_tokens(tokens);
  });
  PooledWer pooled;
  for (size_t i = 0; i < manifest.size(); ++i) {
    auto ref = metrics::tokenize(manifest.ref_text(i));
    auto alignment = metrics::align(ref, hyps[i]);
    pooled.errors += alignment.cost();
    pooled.ref_len += static_cast<int64_t>(ref.size());
  }
  return pooled;
}

}  // namespace

double model_wer(const ExperimentConfig& config, const fs::path& checkpoint,
                 const data::Manifest& manifest) {
  if (manifest.empty()) throw EmptySetError("model_wer: empty manifest");
  nn::TransducerModel model = nn::load_transducer(checkpoint);
  auto features = load_features(manifest);
  return pooled_model_wer(config, model, manifest, features).value();
}

std::vector<double> expert_dev_wers(const data::Manifest& manifest,
                                    const std::vector<fs::path>& nbest_files) {
  if (manifest.empty()) throw EmptySetError("expert_dev_wers: empty manifest");
  ExpertDecodes decodes = load_expert_decodes(manifest, nbest_files);
  std::vector<PooledWer> pooled(nbest_files.size());
  for (size_t i = 0; i < manifest.size(); ++i) {
    auto ref = metrics::tokenize(manifest.ref_text(i));
    for (size_t e = 0; e < nbest_files.size(); ++e) {
      auto alignment = metrics::align(ref, decodes.lists[i][e].entries[0].text);
      pooled[e].errors += alignment.cost();
      pooled[e].ref_len += static_cast<int64_t>(ref.size());
    }
  }
  std::vector<double> wers;
  for (const PooledWer& p : pooled) wers.push_back(p.value());
  return wers;
}

MetricsReport evaluate(const ExperimentConfig& config,
                       const std::vector<EvalModel>& models,
                       const data::Manifest& manifest,
                       const std::string& split_name,
                       const std::optional<fs::path>& weighter_checkpoint,
                       const std::vector<fs::path>& nbest_files,
                       std::ostream* log) {
  if (manifest.empty()) {
    throw EmptySetError("evaluate: split " + split_name +
                        " has zero utterances");
  }
  MetricsReport report;
  report.policy = policy_name(config.policy);
  report.seed = config.seed;
  report.config_hash = config.config_hash();

  auto features = load_features(manifest);
  for (const EvalModel& em : models) {
    nn::TransducerModel model = nn::load_transducer(em.checkpoint);
    PooledWer pooled = pooled_model_wer(config, model, manifest, features);
    report.rows.push_back(
        {split_name, em.name, pooled.value(), std::nullopt, std::nullopt});
    log_line(log, split_name + " " + em.name + " wer " +
                      format4(pooled.value()));
  }

  if (weighter_checkpoint.has_value()) {
    if (static_cast<int>(nbest_files.size()) != config.num_experts) {
      throw ConfigError("evaluate: weighter metrics need per-expert n-best "
                        "files for the split");
    }
    nn::WeighterModel weighter = nn::load_weighter(*weighter_checkpoint);
    ExpertDecodes decodes = load_expert_decodes(manifest, nbest_files);
    std::vector<std::vector<double>> predictions(manifest.size());
    std::vector<metrics::TokenSequence> refs(manifest.size());
    std::vector<std::vector<metrics::TokenSequence>> hyps(manifest.size());
    parallel_for(
        static_cast<int>(manifest.size()), config.threads, [&](int i) {
          std::vector<std::vector<int>> ids;
          std::vector<double> entropies;
          for (int e = 0; e < config.num_experts; ++e) {
            const auto& nb = decodes.lists[i][e];
            hyps[i].push_back(nb.entries[0].text);
            ids.push_back(weighter.to_ids(nb.entries[0].text));
            entropies.push_back(confidence::entropy(nb));
          }
          predictions[i] = weighter.forward_numeric(
              features[i].features, ids,
              weighter.config().use_entropy ? &entropies : nullptr);
        });
    for (size_t i = 0; i < manifest.size(); ++i) {
      refs[i] = metrics::tokenize(manifest.ref_text(i));
    }
    double accuracy = metrics::weighter_accuracy(predictions, refs, hyps);
    double weighted = 0.0;
    for (size_t i = 0; i < manifest.size(); ++i) {
      weighted += metrics::weighted_wer(predictions[i], refs[i], hyps[i]);
    }
    weighted /= static_cast<double>(manifest.size());
    report.rows.push_back(
        {split_name, "weighter", std::nullopt, accuracy, weighted});
    log_line(log, split_name + " weighter accuracy " + format4(accuracy) +
                      " weighted-wer " + format4(weighted));
  }
  return report;
}

}  // namespace experiment
}  // namespace ensdist
