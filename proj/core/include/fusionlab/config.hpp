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

#ifndef FUSIONLAB__CONFIG_HPP_
#define FUSIONLAB__CONFIG_HPP_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fusionlab/eval.hpp"
#include "fusionlab/fogsim.hpp"
#include "fusionlab/model.hpp"
#include "fusionlab/scenegen.hpp"

// One structured-text (TOML) file with a section per module. Precedence, from
// weakest to strongest: built-in defaults, the config file, `--set key=value`
// overrides, dedicated command-line flags.
namespace fusionlab::config
{

struct TrainConfig
{
  int epochs{40};
  int batch_size{4};
  double lr{1e-3};
  std::uint64_t seed{0};
  /// Fog levels drawn uniformly per frame and epoch as augmentation.
  std::vector<int> fog_levels{0};
  /// Worker threads for evaluation (training itself is single-threaded).
  int threads{1};

  void validate() const;
};

struct Config
{
  /// Defaults; the encoder grid covers the default scene extent.
  Config();

  scenegen::SceneSpec scene;
  fogsim::FogParams fog;  // alpha and seed are set per level and frame
  model::ModelConfig model;
  TrainConfig train;
  eval::EvalConfig eval;

  void validate() const;
};

/// Parses and validates; unknown sections or keys and type mismatches raise
/// ConfigError naming the field.
Config parse_config(std::string_view text);
Config load_config(const std::filesystem::path & path);

/// Canonical TOML rendering: every field, fixed order, shortest round-trip
/// floats. parse_config(to_toml(c)) reproduces c.
std::string to_toml(const Config & config);

/// Applies "section.key=value" overrides (TOML value syntax; bare words are
/// taken as strings) on top of `config`.
Config apply_overrides(const Config & config, std::span<const std::string> overrides);

std::uint64_t fnv1a64(std::string_view bytes);
/// 16 hex digits of fnv1a64(to_toml(config)).
std::string config_hash(const Config & config);

}  // namespace fusionlab::config

#endif  // FUSIONLAB__CONFIG_HPP_
