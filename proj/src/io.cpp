// ensdist/io.cpp

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

#include "ensdist/io.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <set>

#include "ensdist/errors.hpp"
#include "ensdist/metrics.hpp"
#include "json.hpp"

namespace ensdist {
namespace data {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

std::string join_tokens(const metrics::TokenSequence& tokens) {
  std::string out;
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0) out += ' ';
    out += tokens[i];
  }
  return out;
}

void put_u16_le(std::string& buf, uint16_t v) {
  buf.push_back(static_cast<char>(v & 0xff));
  buf.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_f32_le(std::string& buf, float f) {
  uint32_t bits;
  std::memcpy(&bits, &f, 4);
  for (int i = 0; i < 4; ++i) {
    buf.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
  }
}

}  // namespace

Manifest Manifest::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("manifest: cannot open " + path.string());
  Manifest m;
  m.root_ = path.parent_path();
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    ordered_json j;
    try {
      j = ordered_json::parse(line);
    } catch (const std::exception& e) {
      throw IoError("manifest: bad JSON at " + path.string() + ":" +
                    std::to_string(line_no) + ": " + e.what());
    }
    Entry e;
    e.utt_id = j.at("utt_id").get<std::string>();
    e.speaker_id = j.at("speaker_id").get<std::string>();
    e.domain_id = j.at("domain_id").get<int>();
    e.num_frames = j.at("num_frames").get<int>();
    e.features_path = j.at("features_path").get<std::string>();
    m.entries_.push_back(std::move(e));
    m.refs_.push_back(j.at("ref_text").get<std::string>());
  }
  return m;
}

void Manifest::save(const fs::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("manifest: cannot write " + path.string());
  for (size_t i = 0; i < entries_.size(); ++i) {
    const Entry& e = entries_[i];
    ordered_json j;
    j["utt_id"] = e.utt_id;
    j["speaker_id"] = e.speaker_id;
    j["domain_id"] = e.domain_id;
    j["num_frames"] = e.num_frames;
    j["features_path"] = e.features_path;
    j["ref_text"] = refs_[i];
    out << j.dump() << '\n';
  }
}

void Manifest::add(Entry entry, std::string ref_text) {
  entries_.push_back(std::move(entry));
  refs_.push_back(std::move(ref_text));
}

const std::string& Manifest::ref_text(size_t i) const {
  if (!refs_allowed_) {
    throw RefAccessError(
        "manifest: ground-truth access is disabled for this consumer "
        "(utt_id " +
        entries_[i].utt_id + ")");
  }
  return refs_[i];
}

std::vector<std::string> Manifest::speakers() const {
  std::set<std::string> ids;
  for (const Entry& e : entries_) ids.insert(e.speaker_id);
  return {ids.begin(), ids.end()};
}

Manifest Manifest::filter_speakers(const std::vector<std::string>& keep) const {
  std::set<std::string> keep_set(keep.begin(), keep.end());
  Manifest out;
  out.root_ = root_;
  out.refs_allowed_ = refs_allowed_;
  for (size_t i = 0; i < entries_.size(); ++i) {
    if (keep_set.count(entries_[i].speaker_id)) {
      out.entries_.push_back(entries_[i]);
      out.refs_.push_back(refs_[i]);
    }
  }
  return out;
}

void write_features(const fs::path& path, const nn::Tensor& frames) {
  if (frames.rows < 1 || frames.rows > 0xffff || frames.cols < 1 ||
      frames.cols > 0xffff) {
    throw IoError("features: frame matrix " + frames.shape_str() +
                  " does not fit the FEA1 header");
  }
  std::string buf;
  buf.reserve(8 + frames.data.size() * 4);
  buf += "FEA1";
  put_u16_le(buf, static_cast<uint16_t>(frames.rows));
  put_u16_le(buf, static_cast<uint16_t>(frames.cols));
  for (double v : frames.data) put_f32_le(buf, static_cast<float>(v));
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("features: cannot write " + path.string());
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

nn::Tensor read_features(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("features: cannot open " + path.string());
  char header[8];
  if (!in.read(header, 8) || std::memcmp(header, "FEA1", 4) != 0) {
    throw IoError("features: bad FEA1 header in " + path.string());
  }
  auto u16 = [&](int off) {
    return static_cast<uint16_t>(static_cast<unsigned char>(header[off])) |
           (static_cast<uint16_t>(static_cast<unsigned char>(header[off + 1]))
            << 8);
  };
  int rows = u16(4);
  int cols = u16(6);
  nn::Tensor t(rows, cols);
  std::vector<char> raw(static_cast<size_t>(rows) * cols * 4);
  if (!in.read(raw.data(), static_cast<std::streamsize>(raw.size()))) {
    throw IoError("features: truncated payload in " + path.string());
  }
  for (int64_t i = 0; i < t.size(); ++i) {
    uint32_t bits = 0;
    for (int b = 3; b >= 0; --b) {
      bits = (bits << 8) |
             static_cast<unsigned char>(raw[static_cast<size_t>(i) * 4 + b]);
    }
    float f;
    std::memcpy(&f, &bits, 4);
    t.data[i] = static_cast<double>(f);
  }
  return t;
}

void write_nbest_file(const fs::path& path,
                      const std::vector<confidence::NBestList>& lists) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("nbest: cannot write " + path.string());
  for (const confidence::NBestList& nb : lists) {
    ordered_json j;
    j["utt_id"] = nb.utt_id;
    j["expert_id"] = nb.expert_id;
    ordered_json hyps = ordered_json::array();
    for (const confidence::NBestEntry& e : nb.entries) {
      ordered_json h;
      h["text"] = join_tokens(e.text);
      h["score"] = e.score;
      hyps.push_back(std::move(h));
    }
    j["hyps"] = std::move(hyps);
    out << j.dump() << '\n';
  }
}

std::vector<confidence::NBestList> read_nbest_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("nbest: cannot open " + path.string());
  std::vector<confidence::NBestList> lists;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    ordered_json j;
    try {
      j = ordered_json::parse(line);
    } catch (const std::exception& e) {
      throw IoError("nbest: bad JSON at " + path.string() + ":" +
                    std::to_string(line_no) + ": " + e.what());
    }
    confidence::NBestList nb;
    nb.utt_id = j.at("utt_id").get<std::string>();
    nb.expert_id = j.at("expert_id").get<std::string>();
    double prev = 0.0;
    bool first = true;
    for (const auto& h : j.at("hyps")) {
      confidence::NBestEntry e;
      e.text = metrics::tokenize(h.at("text").get<std::string>());
      e.score = h.at("score").get<double>();
      if (!(e.score > 0.0)) {
        throw InvalidScoreError("nbest: non-positive score for " + nb.utt_id);
      }
      if (!first && e.score > prev) {
        throw DataError("nbest: scores not descending for " + nb.utt_id);
      }
      prev = e.score;
      first = false;
      nb.entries.push_back(std::move(e));
    }
    lists.push_back(std::move(nb));
  }
  return lists;
}

}  // namespace data
}  // namespace ensdist
