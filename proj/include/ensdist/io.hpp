// ensdist/io.hpp

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

#ifndef ENSDIST_IO_HPP_
#define ENSDIST_IO_HPP_

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "ensdist/confidence.hpp"
#include "ensdist/tensor.hpp"

namespace ensdist {
namespace data {

// Corpus manifest: one utterance per JSONL line with fields
// {utt_id, speaker_id, domain_id, num_frames, features_path, ref_text}.
//
// Ground-truth text sits behind an access guard: ref_text() throws
// RefAccessError when refs are disallowed. Training policies that must not
// see supervision run on a manifest with refs disabled, which makes the
// unsupervised discipline checkable rather than a convention.
class Manifest {
 public:
  struct Entry {
    std::string utt_id;
    std::string speaker_id;
    int domain_id = 0;
    int num_frames = 0;
    std::string features_path;  // relative to the manifest's directory
  };

  static Manifest load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  void add(Entry entry, std::string ref_text);

  size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const Entry& entry(size_t i) const { return entries_[i]; }

  const std::string& ref_text(size_t i) const;

  void set_ref_access(bool allowed) { refs_allowed_ = allowed; }
  bool ref_access() const { return refs_allowed_; }

  // Directory the manifest was loaded from; resolves features_path.
  const std::filesystem::path& root() const { return root_; }
  void set_root(std::filesystem::path root) { root_ = std::move(root); }
  std::filesystem::path features_file(size_t i) const {
    return root_ / entries_[i].features_path;
  }

  std::vector<std::string> speakers() const;  // sorted unique
  Manifest filter_speakers(const std::vector<std::string>& keep) const;

 private:
  std::vector<Entry> entries_;
  std::vector<std::string> refs_;
  bool refs_allowed_ = true;
  std::filesystem::path root_;
};

// Feature files: 8-byte header (magic "FEA1", uint16 LE frame count,
// uint16 LE feature dim) followed by row-major little-endian f32 frames.
void write_features(const std::filesystem::path& path, const nn::Tensor& frames);
nn::Tensor read_features(const std::filesystem::path& path);

// N-best decode files: JSONL records {utt_id, expert_id, hyps:[{text,score}]}
// with positive scores in descending order.
void write_nbest_file(const std::filesystem::path& path,
                      const std::vector<confidence::NBestList>& lists);
std::vector<confidence::NBestList> read_nbest_file(
    const std::filesystem::path& path);

}  // namespace data
}  // namespace ensdist

#endif  // ENSDIST_IO_HPP_
