// ensdist/experiment.hpp

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

#ifndef ENSDIST_EXPERIMENT_HPP_
#define ENSDIST_EXPERIMENT_HPP_

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ensdist/data.hpp"
#include "ensdist/decode.hpp"
#include "ensdist/transducer.hpp"
#include "ensdist/weighter.hpp"

namespace ensdist {
namespace experiment {

enum class Policy { kBestExpert, kAllExperts, kRover, kSmartWeighter, kOracle };

Policy policy_from_string(const std::string& name);
std::string policy_name(Policy policy);

// One config drives the whole pipeline. The corpus "world" (vocabulary,
// domains, voices) is shared between the teacher pool and the student pool;
// only speakers differ, so experts transfer across pools.
struct ExperimentConfig {
  data::CorpusSpec world;  // template: counts/seeds below override per pool

  int teacher_speakers = 40;
  int teacher_utterances = 40;
  uint64_t teacher_seed = 101;
  // Labeled gate-training subset, carved out of the teacher pool speakers
  // (disjoint from both the expert splits and the student pool).
  int weighter_speakers = 4;

  int student_speakers = 24;
  int student_utterances = 30;
  uint64_t student_seed = 202;
  int dev_speakers = 4;
  int eval_speakers = 4;

  std::string partition_method = "clustered";  // "clustered" | "random"

  int num_experts = 3;
  int expert_train_steps = 2000;
  double expert_learning_rate = 1e-3;
  int student_train_steps = 4000;
  double student_learning_rate = 1e-3;
  int weighter_train_steps = 1000;
  double weighter_learning_rate = 1e-3;
  int weighter_batch_size = 4;
  bool position_randomization = true;

  // architecture knobs (feature_dim / vocab come from the world)
  int encoder_layers = 2;
  int hidden = 64;
  int predictor_layers = 1;
  int embed_dim = 32;
  int joiner_hidden = 64;
  int weighter_hidden = 64;
  int weighter_embed_dim = 32;
  int attention_heads = 2;
  int head_hidden = 64;
  bool use_entropy = true;
  std::string weighter_pooling = "segment_mean";  // | "global_mean"

  Policy policy = Policy::kSmartWeighter;
  double temperature = 1.0;
  std::string rover_scheme = "frequency";  // | "confidence:<alpha>"

  int nbest = 10;
  int beam_width = 16;
  int max_emits_per_frame = 5;

  uint64_t seed = 1;
  int threads = 1;

  static ExperimentConfig load(const std::filesystem::path& path);
  void validate() const;

  data::CorpusSpec teacher_corpus_spec() const;
  data::CorpusSpec student_corpus_spec() const;
  nn::TransducerConfig transducer_config() const;
  nn::WeighterConfig weighter_config() const;
  nn::DecodeConfig decode_config() const;

  // Canonical serialization (sorted keys, round-trip floats) and its hash;
  // every report embeds the hash so results are traceable to a config.
  std::string canonical_json() const;
  std::string config_hash() const;
};

struct MetricsReport {
  struct Row {
    std::string split;
    std::string model;
    std::optional<double> wer;
    std::optional<double> accuracy;
    std::optional<double> weighted_wer;
  };
  std::vector<Row> rows;
  std::string policy;
  uint64_t seed = 0;
  std::string config_hash;

  std::string csv_string() const;
  void save_csv(const std::filesystem::path& path) const;
  void save_json(const std::filesystem::path& path) const;
};

struct ExpertTrainResult {
  std::vector<std::filesystem::path> checkpoints;
  std::vector<std::vector<double>> loss_curves;  // per expert, per step
};

// Trains one transducer per expert split with ground-truth supervision.
// Throws ConfigError on an empty split.
ExpertTrainResult train_experts(const ExperimentConfig& config,
                                const data::Manifest& expert_train,
                                const data::Partition& partition,
                                const std::filesystem::path& out_dir,
                                std::ostream* log = nullptr);

// Beam n-best decode of every manifest utterance with each expert. Returns
// one n-best file per expert (decode order is manifest order regardless of
// thread count).
std::vector<std::filesystem::path> decode_experts(
    const ExperimentConfig& config,
    const std::vector<std::filesystem::path>& checkpoints,
    const data::Manifest& manifest, const std::filesystem::path& out_dir,
    std::ostream* log = nullptr);

struct WeighterTrainResult {
  std::filesystem::path checkpoint;
  std::vector<double> accuracy_trajectory;  // sampled during training
  double final_train_accuracy = 0.0;
};

// BCE training of the gate on a labeled subset: targets z from
// best-expert labels per utterance, expert order shuffled per example when
// position randomization is on.
WeighterTrainResult train_weighter(
    const ExperimentConfig& config, const data::Manifest& labeled,
    const std::vector<std::filesystem::path>& nbest_files,
    const std::filesystem::path& out_path, std::ostream* log = nullptr,
    std::optional<bool> use_entropy_override = std::nullopt);

struct StudentInputs {
  std::vector<std::filesystem::path> nbest_files;  // student-pool decodes
  std::optional<std::filesystem::path> weighter_checkpoint;
  // Validation WERs per expert, for the Best-Expert policy.
  std::optional<std::vector<double>> dev_wer_table;
};

struct StudentTrainResult {
  std::filesystem::path checkpoint;
  std::vector<double> loss_curve;
};

// Trains the student under a policy. Ground truth is readable only under
// the Oracle policy; every other policy runs against a manifest whose
// reference guard is disarmed, so an accidental read throws.
StudentTrainResult train_student(const ExperimentConfig& config, Policy policy,
                                 const data::Manifest& unlabeled,
                                 const StudentInputs& inputs,
                                 const std::filesystem::path& out_path,
                                 std::ostream* log = nullptr);

struct EvalModel {
  std::string name;
  std::filesystem::path checkpoint;
};

// Greedy-decode WER per model on the split; with a weighter (and the
// split's n-best files) also gate accuracy and weighted WER.
MetricsReport evaluate(
    const ExperimentConfig& config, const std::vector<EvalModel>& models,
    const data::Manifest& manifest, const std::string& split_name,
    const std::optional<std::filesystem::path>& weighter_checkpoint =
        std::nullopt,
    const std::vector<std::filesystem::path>& nbest_files = {},
    std::ostream* log = nullptr);

// Corpus-level WER of one checkpoint on a manifest (pooled edit counts).
double model_wer(const ExperimentConfig& config,
                 const std::filesystem::path& checkpoint,
                 const data::Manifest& manifest);

// Pooled WER of each expert's 1-best decode against the manifest refs;
// feeds best_expert_weights for the Best-Expert policy.
std::vector<double> expert_dev_wers(
    const data::Manifest& manifest,
    const std::vector<std::filesystem::path>& nbest_files);

}  // namespace experiment
}  // namespace ensdist

#endif  // ENSDIST_EXPERIMENT_HPP_
