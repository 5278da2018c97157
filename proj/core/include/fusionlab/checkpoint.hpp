// Copyright 2026 The fusion-lab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef FUSIONLAB__CHECKPOINT_HPP_
#define FUSIONLAB__CHECKPOINT_HPP_

#include <filesystem>

#include "fusionlab/nn.hpp"

// Checkpoint container: magic "L4DRCKPT", u32 version, then records of
// (u32 name length, name bytes, u32 rank, u64 dims..., f64 payload) until end
// of file. All integers and floats little-endian.
namespace fusionlab::checkpoint
{

constexpr char kMagic[8] = {'L', '4', 'D', 'R', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

void save(const std::filesystem::path & path, const nn::StateList & state);
nn::StateList read(const std::filesystem::path & path);

/// read() followed by nn::load_state() into `target`.
void load_into(const std::filesystem::path & path, const nn::StateList & target);

}  // namespace fusionlab::checkpoint

#endif  // FUSIONLAB__CHECKPOINT_HPP_
