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

#ifndef FUSIONLAB__FOGSIM_HPP_
#define FUSIONLAB__FOGSIM_HPP_

#include <array>
#include <cstdint>

#include "fusionlab/pointcloud.hpp"

namespace fusionlab::fogsim
{

/// Attenuation coefficient per fog level 0..4 [1/m].
constexpr std::array<double, 5> kFogLevelAlpha = {0.00, 0.03, 0.06, 0.10, 0.20};

struct FogParams
{
  double alpha{0.0};             // [1/m]
  double scatter_rate{0.3};      // probability that a lost return spawns a spurious one
  std::uint64_t seed{0};
  double min_reflectance{0.05};  // detection threshold on attenuated reflectance
  double scatter_mean_range{15.0};
  double scatter_reflectance_max{0.2};

  void validate() const;
};

FogParams fog_level_params(int level, std::uint64_t seed = 0);

/// Two-way Beer-Lambert attenuation lambda * exp(-2 alpha r) followed by a
/// hard detection threshold. Each lost return spawns, with probability
/// scatter_rate, a background-labelled return on the same ray at a range
/// drawn from an exponential distribution truncated to the original range.
/// alpha == 0 returns the input unchanged.
pointcloud::LidarCloud simulate_fog(const pointcloud::LidarCloud & cloud, const FogParams & params);

/// Radar is not degraded by fog; returns the input unchanged.
pointcloud::RadarCloud simulate_fog(const pointcloud::RadarCloud & cloud, const FogParams & params);

}  // namespace fusionlab::fogsim

#endif  // FUSIONLAB__FOGSIM_HPP_
