// ensdist/checkpoint.cpp

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

#include "ensdist/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "ensdist/errors.hpp"
#include "json.hpp"

namespace ensdist {
namespace nn {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

void put_u64_le(std::string& buf, uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
}

void put_f64_le(std::string& buf, double d) {
  uint64_t bits;
  std::memcpy(&bits, &d, 8);
  put_u64_le(buf, bits);
}

uint64_t get_u64_le(const char* p) {
  uint64_t v = 0;
  for (int i = 7; i >= 0; --i) {
    v = (v << 8) | static_cast<unsigned char>(p[i]);
  }
  return v;
}

ordered_json param_manifest(const ParameterStore& params) {
  ordered_json list = ordered_json::array();
  for (const ParamTensor& p : params) {
    ordered_json j;
    j["name"] = p.name;
    j["rows"] = p.value.rows;
    j["cols"] = p.value.cols;
    list.push_back(std::move(j));
  }
  return list;
}

void write_file(const fs::path& path, const ordered_json& header,
                const ParameterStore& params) {
  std::string buf;
  buf += kCheckpointMagic;  // 5 bytes
  std::string header_str = header.dump();
  put_u64_le(buf, header_str.size());
  buf += header_str;
  for (const ParamTensor& p : params) {
    for (double v : p.value.data) put_f64_le(buf, v);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("checkpoint: cannot write " + path.string());
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

struct RawCheckpoint {
  nlohmann::json header;
  std::vector<double> blocks;
};

RawCheckpoint read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("checkpoint: cannot open " + path.string());
  std::string content{std::istreambuf_iterator<char>(in),
                      std::istreambuf_iterator<char>()};
  const size_t magic_len = std::strlen(kCheckpointMagic);
  if (content.size() < magic_len + 8 ||
      content.compare(0, magic_len, kCheckpointMagic) != 0) {
    throw IoError("checkpoint: bad magic in " + path.string());
  }
  uint64_t header_len = get_u64_le(content.data() + magic_len);
  if (content.size() < magic_len + 8 + header_len) {
    throw IoError("checkpoint: truncated header in " + path.string());
  }
  RawCheckpoint raw;
  try {
    raw.header =
        nlohmann::json::parse(content.substr(magic_len + 8, header_len));
  } catch (const std::exception& e) {
    throw IoError("checkpoint: bad header JSON in " + path.string() + ": " +
                  e.what());
  }
  size_t offset = magic_len + 8 + header_len;
  size_t payload = content.size() - offset;
  if (payload % 8 != 0) {
    throw IoError("checkpoint: misaligned parameter payload in " +
                  path.string());
  }
  raw.blocks.resize(payload / 8);
  for (size_t i = 0; i < raw.blocks.size(); ++i) {
    uint64_t bits = get_u64_le(content.data() + offset + i * 8);
    std::memcpy(&raw.blocks[i], &bits, 8);
  }
  return raw;
}

void restore_params(const RawCheckpoint& raw, ParameterStore& params,
                    const fs::path& path) {
  const auto& manifest = raw.header.at("params");
  if (manifest.size() != params.size()) {
    throw IoError("checkpoint: parameter count mismatch in " + path.string());
  }
  size_t offset = 0;
  for (size_t i = 0; i < params.size(); ++i) {
    ParamTensor& p = params[i];
    const auto& m = manifest[i];
    if (m.at("name").get<std::string>() != p.name ||
        m.at("rows").get<int>() != p.value.rows ||
        m.at("cols").get<int>() != p.value.cols) {
      throw IoError("checkpoint: parameter layout mismatch at " + p.name +
                    " in " + path.string());
    }
    size_t count = static_cast<size_t>(p.value.size());
    if (offset + count > raw.blocks.size()) {
      throw IoError("checkpoint: truncated parameter payload in " +
                    path.string());
    }
    std::copy(raw.blocks.begin() + offset, raw.blocks.begin() + offset + count,
              p.value.data.begin());
    offset += count;
  }
  if (offset != raw.blocks.size()) {
    throw IoError("checkpoint: trailing bytes in " + path.string());
  }
}

}  // namespace

void save_checkpoint(const fs::path& path, const TransducerModel& model) {
  const TransducerConfig& c = model.config();
  ordered_json header;
  header["kind"] = "transducer";
  ordered_json cfg;
  cfg["feature_dim"] = c.feature_dim;
  cfg["vocab_size"] = c.vocab_size;
  cfg["encoder_layers"] = c.encoder_layers;
  cfg["hidden"] = c.hidden;
  cfg["predictor_layers"] = c.predictor_layers;
  cfg["embed_dim"] = c.embed_dim;
  cfg["joiner_hidden"] = c.joiner_hidden;
  header["config"] = std::move(cfg);
  header["vocab"] = model.vocab();
  header["seed"] = model.seed();
  header["step"] = model.step();
  header["params"] = param_manifest(model.params());
  write_file(path, header, model.params());
}

void save_checkpoint(const fs::path& path, const WeighterModel& model) {
  const WeighterConfig& c = model.config();
  ordered_json header;
  header["kind"] = "weighter";
  ordered_json cfg;
  cfg["feature_dim"] = c.feature_dim;
  cfg["num_experts"] = c.num_experts;
  cfg["vocab_size"] = c.vocab_size;
  cfg["hidden"] = c.hidden;
  cfg["embed_dim"] = c.embed_dim;
  cfg["attention_heads"] = c.attention_heads;
  cfg["head_hidden"] = c.head_hidden;
  cfg["use_entropy"] = c.use_entropy;
  cfg["pooling"] = c.pooling == WeighterConfig::Pooling::kSegmentMean
                       ? "segment_mean"
                       : "global_mean";
  header["config"] = std::move(cfg);
  header["vocab"] = model.vocab();
  header["seed"] = model.seed();
  header["step"] = model.step();
  header["params"] = param_manifest(model.params());
  write_file(path, header, model.params());
}

std::string checkpoint_kind(const fs::path& path) {
  return read_file(path).header.at("kind").get<std::string>();
}

TransducerModel load_transducer(const fs::path& path) {
  RawCheckpoint raw = read_file(path);
  if (raw.header.at("kind").get<std::string>() != "transducer") {
    throw IoError("checkpoint: " + path.string() + " is not a transducer");
  }
  const auto& cfg_json = raw.header.at("config");
  TransducerConfig cfg;
  cfg.feature_dim = cfg_json.at("feature_dim").get<int>();
  cfg.vocab_size = cfg_json.at("vocab_size").get<int>();
  cfg.encoder_layers = cfg_json.at("encoder_layers").get<int>();
  cfg.hidden = cfg_json.at("hidden").get<int>();
  cfg.predictor_layers = cfg_json.at("predictor_layers").get<int>();
  cfg.embed_dim = cfg_json.at("embed_dim").get<int>();
  cfg.joiner_hidden = cfg_json.at("joiner_hidden").get<int>();
  TransducerModel model(cfg,
                        raw.header.at("vocab").get<std::vector<std::string>>(),
                        raw.header.at("seed").get<uint64_t>());
  model.set_step(raw.header.at("step").get<int64_t>());
  restore_params(raw, model.params(), path);
  return model;
}

WeighterModel load_weighter(const fs::path& path) {
  RawCheckpoint raw = read_file(path);
  if (raw.header.at("kind").get<std::string>() != "weighter") {
    throw IoError("checkpoint: " + path.string() + " is not a weighter");
  }
  const auto& cfg_json = raw.header.at("config");
  WeighterConfig cfg;
  cfg.feature_dim = cfg_json.at("feature_dim").get<int>();
  cfg.num_experts = cfg_json.at("num_experts").get<int>();
  cfg.vocab_size = cfg_json.at("vocab_size").get<int>();
  cfg.hidden = cfg_json.at("hidden").get<int>();
  cfg.embed_dim = cfg_json.at("embed_dim").get<int>();
  cfg.attention_heads = cfg_json.at("attention_heads").get<int>();
  cfg.head_hidden = cfg_json.at("head_hidden").get<int>();
  cfg.use_entropy = cfg_json.at("use_entropy").get<bool>();
  cfg.pooling = cfg_json.at("pooling").get<std::string>() == "segment_mean"
                    ? WeighterConfig::Pooling::kSegmentMean
                    : WeighterConfig::Pooling::kGlobalMean;
  WeighterModel model(cfg,
                      raw.header.at("vocab").get<std::vector<std::string>>(),
                      raw.header.at("seed").get<uint64_t>());
  model.set_step(raw.header.at("step").get<int64_t>());
  restore_params(raw, model.params(), path);
  return model;
}

}  // namespace nn
}  // namespace ensdist
