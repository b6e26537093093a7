// ensdist/cli.cpp

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

#include "ensdist/cli.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <set>

#include "CLI11.hpp"
#include "ensdist/confidence.hpp"
#include "ensdist/data.hpp"
#include "ensdist/errors.hpp"
#include "ensdist/experiment.hpp"
#include "ensdist/fusion.hpp"
#include "ensdist/metrics.hpp"
#include "json.hpp"

namespace ensdist {
namespace cli {

namespace fs = std::filesystem;
using experiment::ExperimentConfig;

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string format_wer(const Rational& wer) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", wer.to_double());
  return buf;
}

// Groups n-best records by utterance, experts ordered by expert_id.
std::map<std::string, std::map<std::string, confidence::NBestList>>
group_nbest(const std::vector<std::string>& files) {
  std::map<std::string, std::map<std::string, confidence::NBestList>> grouped;
  for (const std::string& file : files) {
    for (auto& nb : data::read_nbest_file(file)) {
      grouped[nb.utt_id][nb.expert_id] = std::move(nb);
    }
  }
  return grouped;
}

int cmd_gen_corpus(const std::string& spec_path, const std::string& out_dir,
                   std::ostream& out) {
  auto spec = data::CorpusSpec::from_json_file(spec_path);
  auto manifest = data::generate_corpus(spec, out_dir);
  out << "wrote " << manifest.size() << " utterances to " << out_dir << "\n";
  return 0;
}

int cmd_cluster(const std::string& manifest_path, int k,
                const std::string& method, uint64_t seed,
                const std::string& out_path, const std::string& metric,
                int segment_frames, std::ostream& out) {
  auto manifest = data::Manifest::load(manifest_path);
  data::Partition partition;
  if (method == "random") {
    partition = data::random_partition(manifest.speakers(), k, seed);
  } else if (method == "kmeans") {
    auto m = metric == "cosine" ? data::DistanceMetric::kCosine
                                : data::DistanceMetric::kEuclidean;
    partition = data::clustered_partition(manifest, segment_frames, k, seed, m);
  } else {
    throw ConfigError("cluster: method must be random or kmeans");
  }
  partition.validate();
  partition.save(out_path);
  out << "partitioned " << partition.assignment.size() << " speakers into "
      << k << " splits (" << partition.method << ")\n";
  return 0;
}

int cmd_wer(const std::string& ref_path, const std::string& hyp_path,
            const std::string& pairs_path, std::ostream& out) {
  if (!pairs_path.empty()) {
    std::ifstream in(pairs_path);
    if (!in) throw IoError("cannot open " + pairs_path);
    int64_t errors = 0, ref_len = 0;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
      if (j.is_discarded()) {
        throw DataError("wer: bad JSON at " + pairs_path + ":" +
                        std::to_string(line_no));
      }
      auto ref = metrics::tokenize(j.at("ref").get<std::string>());
      auto hyp = metrics::tokenize(j.at("hyp").get<std::string>());
      Rational wer = metrics::wer(ref, hyp);
      std::string utt = j.contains("utt_id")
                            ? j.at("utt_id").get<std::string>()
                            : std::to_string(line_no);
      out << utt << " " << format_wer(wer) << "\n";
      auto alignment = metrics::align(ref, hyp);
      errors += alignment.cost();
      ref_len += static_cast<int64_t>(ref.size());
    }
    if (ref_len == 0) throw EmptySetError("wer: no reference tokens in batch");
    out << "TOTAL " << format_wer(Rational(errors, ref_len)) << "\n";
    return 0;
  }
  if (ref_path.empty() || hyp_path.empty()) {
    throw ConfigError("wer: need --ref and --hyp (or --pairs)");
  }
  auto ref = metrics::tokenize(read_file(ref_path));
  auto hyp = metrics::tokenize(read_file(hyp_path));
  out << format_wer(metrics::wer(ref, hyp)) << "\n";
  return 0;
}

int cmd_rover(const std::vector<std::string>& nbest_files,
              const std::string& scheme_str, const std::string& out_path,
              bool order_sensitivity, std::ostream& out, std::ostream& err) {
  fusion::VotingScheme scheme = fusion::VotingScheme::frequency();
  if (scheme_str != "frequency") {
    const std::string prefix = "confidence:";
    if (scheme_str.rfind(prefix, 0) != 0) {
      throw ConfigError("rover: scheme must be frequency or confidence:<alpha>");
    }
    scheme = fusion::VotingScheme::confidence(
        std::stod(scheme_str.substr(prefix.size())));
  }

  auto grouped = group_nbest(nbest_files);
  std::ofstream file_out;
  std::ostream* sink = &out;
  if (!out_path.empty()) {
    file_out.open(out_path, std::ios::binary);
    if (!file_out) throw IoError("rover: cannot write " + out_path);
    sink = &file_out;
  }

  int sensitive = 0;
  for (const auto& [utt_id, experts] : grouped) {
    std::vector<metrics::TokenSequence> hyps;
    std::vector<double> confs;
    for (const auto& [expert_id, nb] : experts) {  // expert order = id order
      hyps.push_back(nb.entries[0].text);
      confs.push_back(nb.entries[0].score);
    }
    auto fused = fusion::rover(hyps, scheme, &confs);
    nlohmann::ordered_json j;
    j["utt_id"] = utt_id;
    std::string text;
    for (size_t i = 0; i < fused.size(); ++i) {
      if (i > 0) text += ' ';
      text += fused[i];
    }
    j["text"] = text;
    (*sink) << j.dump() << "\n";

    if (order_sensitivity) {
      std::vector<size_t> perm(hyps.size());
      for (size_t i = 0; i < perm.size(); ++i) perm[i] = i;
      std::set<metrics::TokenSequence> outputs;
      do {
        std::vector<metrics::TokenSequence> permuted;
        std::vector<double> permuted_confs;
        for (size_t i : perm) {
          permuted.push_back(hyps[i]);
          permuted_confs.push_back(confs[i]);
        }
        outputs.insert(fusion::rover(permuted, scheme, &permuted_confs));
      } while (std::next_permutation(perm.begin(), perm.end()));
      if (outputs.size() > 1) ++sensitive;
    }
  }
  if (order_sensitivity) {
    err << "order-sensitive utterances: " << sensitive << "/" << grouped.size()
        << "\n";
  }
  return 0;
}

int cmd_entropy(const std::string& nbest_path, const std::string& out_path,
                std::ostream& out) {
  auto lists = data::read_nbest_file(nbest_path);
  std::ofstream file_out;
  std::ostream* sink = &out;
  if (!out_path.empty()) {
    file_out.open(out_path, std::ios::binary);
    if (!file_out) throw IoError("entropy: cannot write " + out_path);
    sink = &file_out;
  }
  for (const auto& nb : lists) {
    nlohmann::ordered_json j;
    j["utt_id"] = nb.utt_id;
    j["expert_id"] = nb.expert_id;
    j["H"] = confidence::entropy(nb);
    (*sink) << j.dump() << "\n";
  }
  return 0;
}

std::vector<fs::path> to_paths(const std::vector<std::string>& strings) {
  return {strings.begin(), strings.end()};
}

}  // namespace

namespace {

int run_parsed(const std::vector<std::string>& args, std::ostream& out,
               std::ostream& err);

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err) {
  try {
    return run_parsed(args, out, err);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return 3;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

namespace {

int run_parsed(const std::vector<std::string>& args, std::ostream& out,
               std::ostream& err) {
  CLI::App app{"ensemble-distillation toolkit"};
  app.require_subcommand(1);

  // gen-corpus
  std::string spec_path, out_dir;
  auto* gen = app.add_subcommand("gen-corpus", "generate a synthetic corpus");
  gen->add_option("--spec", spec_path, "corpus spec JSON")->required();
  gen->add_option("--out", out_dir, "output directory")->required();

  // cluster
  std::string manifest_path, cluster_method = "kmeans", partition_out;
  std::string metric = "euclidean";
  int cluster_k = 3, segment_frames = 4;
  uint64_t cluster_seed = 1;
  auto* cluster = app.add_subcommand("cluster", "partition speakers");
  cluster->add_option("--manifest", manifest_path)->required();
  cluster->add_option("--k", cluster_k);
  cluster->add_option("--method", cluster_method)
      ->check(CLI::IsMember({"random", "kmeans"}));
  cluster->add_option("--seed", cluster_seed);
  cluster->add_option("--out", partition_out)->required();
  cluster->add_option("--metric", metric)
      ->check(CLI::IsMember({"euclidean", "cosine"}));
  cluster->add_option("--segment-frames", segment_frames);

  // train-experts
  std::string config_path, train_manifest, partition_path, experts_out;
  auto* tex = app.add_subcommand("train-experts", "train expert transducers");
  tex->add_option("--config", config_path)->required();
  tex->add_option("--manifest", train_manifest)->required();
  tex->add_option("--partition", partition_path)->required();
  tex->add_option("--out", experts_out)->required();

  // decode
  std::vector<std::string> expert_ckpts;
  std::string decode_manifest, decode_out;
  auto* dec = app.add_subcommand("decode", "n-best decode with experts");
  dec->add_option("--config", config_path)->required();
  dec->add_option("--expert", expert_ckpts, "expert checkpoint (repeatable)")
      ->required();
  dec->add_option("--manifest", decode_manifest)->required();
  dec->add_option("--out", decode_out)->required();

  // train-weighter
  std::string weighter_manifest, weighter_out;
  std::vector<std::string> weighter_nbest;
  bool no_entropy = false;
  auto* tw = app.add_subcommand("train-weighter", "train the gate network");
  tw->add_option("--config", config_path)->required();
  tw->add_option("--manifest", weighter_manifest)->required();
  tw->add_option("--nbest", weighter_nbest, "per-expert n-best files")
      ->required();
  tw->add_option("--out", weighter_out)->required();
  tw->add_flag("--no-entropy", no_entropy,
               "train without the entropy side feature");

  // train-student
  std::string policy_str, student_manifest, student_out, weighter_ckpt;
  std::string dev_manifest_path;
  std::vector<std::string> student_nbest, dev_nbest;
  auto* ts = app.add_subcommand("train-student", "train the student model");
  ts->add_option("--config", config_path)->required();
  ts->add_option("--policy", policy_str,
                 "best_expert|all_experts|rover|smart_weighter|oracle")
      ->required();
  ts->add_option("--manifest", student_manifest)->required();
  ts->add_option("--nbest", student_nbest)->required();
  ts->add_option("--out", student_out)->required();
  ts->add_option("--weighter", weighter_ckpt);
  ts->add_option("--dev-manifest", dev_manifest_path);
  ts->add_option("--dev-nbest", dev_nbest);

  // evaluate
  std::string eval_manifest_path, split_name = "eval", report_prefix;
  std::vector<std::string> model_specs, eval_nbest;
  std::string eval_weighter;
  auto* ev = app.add_subcommand("evaluate", "WER / weighter metrics report");
  ev->add_option("--config", config_path)->required();
  ev->add_option("--manifest", eval_manifest_path)->required();
  ev->add_option("--split", split_name);
  ev->add_option("--model", model_specs, "name=checkpoint (repeatable)")
      ->required();
  ev->add_option("--weighter", eval_weighter);
  ev->add_option("--nbest", eval_nbest);
  ev->add_option("--out", report_prefix, "report path prefix (.csv/.json)")
      ->required();

  // rover
  std::vector<std::string> rover_nbest;
  std::string rover_scheme = "frequency", rover_out;
  bool order_sensitivity = false;
  auto* rov = app.add_subcommand("rover", "fuse expert transcripts");
  rov->add_option("--nbest", rover_nbest)->required();
  rov->add_option("--scheme", rover_scheme);
  rov->add_option("--out", rover_out);
  rov->add_flag("--order-sensitivity", order_sensitivity,
                "report permutation sensitivity to stderr");

  // wer
  std::string ref_path, hyp_path, pairs_path;
  auto* wer = app.add_subcommand("wer", "word error rate");
  wer->add_option("--ref", ref_path);
  wer->add_option("--hyp", hyp_path);
  wer->add_option("--pairs", pairs_path, "JSONL {ref, hyp} batch");

  // entropy
  std::string entropy_nbest, entropy_out;
  auto* ent = app.add_subcommand("entropy", "n-best score entropy");
  ent->add_option("--nbest", entropy_nbest)->required();
  ent->add_option("--out", entropy_out);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return 0;
    }
    err << e.what() << "\n";
    return 2;
  }

  if (gen->parsed()) return cmd_gen_corpus(spec_path, out_dir, out);
  if (cluster->parsed()) {
    return cmd_cluster(manifest_path, cluster_k, cluster_method, cluster_seed,
                       partition_out, metric, segment_frames, out);
  }
  if (tex->parsed()) {
    auto config = ExperimentConfig::load(config_path);
    auto manifest = data::Manifest::load(train_manifest);
    auto partition = data::Partition::load(partition_path);
    experiment::train_experts(config, manifest, partition, experts_out, &err);
    out << "trained " << config.num_experts << " experts into " << experts_out
        << "\n";
    return 0;
  }
  if (dec->parsed()) {
    auto config = ExperimentConfig::load(config_path);
    auto manifest = data::Manifest::load(decode_manifest);
    auto files = experiment::decode_experts(config, to_paths(expert_ckpts),
                                            manifest, decode_out, &err);
    for (const auto& f : files) out << f.string() << "\n";
    return 0;
  }
  if (tw->parsed()) {
    auto config = ExperimentConfig::load(config_path);
    auto manifest = data::Manifest::load(weighter_manifest);
    std::optional<bool> override;
    if (no_entropy) override = false;
    auto result = experiment::train_weighter(
        config, manifest, to_paths(weighter_nbest), weighter_out, &err,
        override);
    out << "weighter final train accuracy "
        << result.final_train_accuracy << "\n";
    return 0;
  }
  if (ts->parsed()) {
    auto config = ExperimentConfig::load(config_path);
    auto policy = experiment::policy_from_string(policy_str);
    auto manifest = data::Manifest::load(student_manifest);
    experiment::StudentInputs inputs;
    inputs.nbest_files = to_paths(student_nbest);
    if (!weighter_ckpt.empty()) inputs.weighter_checkpoint = weighter_ckpt;
    if (policy == experiment::Policy::kBestExpert) {
      if (dev_manifest_path.empty() || dev_nbest.empty()) {
        throw ConfigError(
            "train-student: best_expert needs --dev-manifest and --dev-nbest");
      }
      auto dev = data::Manifest::load(dev_manifest_path);
      inputs.dev_wer_table =
          experiment::expert_dev_wers(dev, to_paths(dev_nbest));
    }
    experiment::train_student(config, policy, manifest, inputs, student_out,
                              &err);
    out << "trained " << policy_str << " student into " << student_out << "\n";
    return 0;
  }
  if (ev->parsed()) {
    auto config = ExperimentConfig::load(config_path);
    auto manifest = data::Manifest::load(eval_manifest_path);
    std::vector<experiment::EvalModel> models;
    for (const std::string& spec : model_specs) {
      auto eq = spec.find('=');
      if (eq == std::string::npos) {
        throw ConfigError("evaluate: --model expects name=checkpoint");
      }
      models.push_back({spec.substr(0, eq), spec.substr(eq + 1)});
    }
    std::optional<fs::path> weighter;
    if (!eval_weighter.empty()) weighter = eval_weighter;
    auto report = experiment::evaluate(config, models, manifest, split_name,
                                       weighter, to_paths(eval_nbest), &err);
    report.save_csv(report_prefix + ".csv");
    report.save_json(report_prefix + ".json");
    out << report.csv_string();
    return 0;
  }
  if (rov->parsed()) {
    return cmd_rover(rover_nbest, rover_scheme, rover_out, order_sensitivity,
                     out, err);
  }
  if (wer->parsed()) return cmd_wer(ref_path, hyp_path, pairs_path, out);
  if (ent->parsed()) return cmd_entropy(entropy_nbest, entropy_out, out);
  return 2;
}

}  // namespace

}  // namespace cli
}  // namespace ensdist
