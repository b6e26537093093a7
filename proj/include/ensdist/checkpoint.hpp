// ensdist/checkpoint.hpp

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

#ifndef ENSDIST_CHECKPOINT_HPP_
#define ENSDIST_CHECKPOINT_HPP_

#include <filesystem>
#include <string>

#include "ensdist/transducer.hpp"
#include "ensdist/weighter.hpp"

namespace ensdist {
namespace nn {

// Single-file model container: the magic string "ENSD1", a little-endian
// uint64 header length, a JSON header (model kind, architecture
// hyperparameters, vocab, seed, step count, parameter manifest), then raw
// little-endian f64 parameter blocks in declared order.
inline constexpr char kCheckpointMagic[] = "ENSD1";

void save_checkpoint(const std::filesystem::path& path,
                     const TransducerModel& model);
void save_checkpoint(const std::filesystem::path& path,
                     const WeighterModel& model);

// Reads just the header's "kind" field ("transducer" or "weighter").
std::string checkpoint_kind(const std::filesystem::path& path);

TransducerModel load_transducer(const std::filesystem::path& path);
WeighterModel load_weighter(const std::filesystem::path& path);

}  // namespace nn
}  // namespace ensdist

#endif  // ENSDIST_CHECKPOINT_HPP_
