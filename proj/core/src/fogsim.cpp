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

#include "fusionlab/fogsim.hpp"

#include <cmath>
#include <random>

#include "fusionlab/error.hpp"

namespace fusionlab::fogsim
{

void FogParams::validate() const
{
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) {
    throw ConfigError("fog.alpha", "must be >= 0");
  }
  if (!(scatter_rate >= 0.0 && scatter_rate <= 1.0)) {
    throw ConfigError("fog.scatter_rate", "must be in [0, 1]");
  }
  if (!(min_reflectance >= 0.0)) {
    throw ConfigError("fog.min_reflectance", "must be >= 0");
  }
  if (!(scatter_mean_range > 0.0)) {
    throw ConfigError("fog.scatter_mean_range", "must be > 0");
  }
}

FogParams fog_level_params(int level, std::uint64_t seed)
{
  if (level < 0 || level >= static_cast<int>(kFogLevelAlpha.size())) {
    throw ConfigError("fog.level", "must be in [0, 4], got " + std::to_string(level));
  }
  FogParams p;
  p.alpha = kFogLevelAlpha[static_cast<std::size_t>(level)];
  p.seed = seed;
  return p;
}

pointcloud::LidarCloud simulate_fog(const pointcloud::LidarCloud & cloud, const FogParams & params)
{
  params.validate();
  if (params.alpha == 0.0) {
    return cloud;
  }
  std::mt19937_64 rng(params.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double lam_lo = params.min_reflectance;
  const double lam_hi = std::max(params.min_reflectance, params.scatter_reflectance_max);

  pointcloud::LidarCloud out;
  out.reserve(cloud.size());
  for (const auto & p : cloud) {
    const double r = pointcloud::range_of(p);
    const double attenuated = p.reflectance * std::exp(-2.0 * params.alpha * r);
    if (attenuated >= params.min_reflectance) {
      auto q = p;
      q.reflectance = attenuated;
      out.push_back(q);
      continue;
    }
    if (unit(rng) >= params.scatter_rate || r <= 0.0) {
      continue;
    }
    // Inverse CDF of Exp(mean) truncated to (0, r).
    const double u = unit(rng);
    const double mean = params.scatter_mean_range;
    const double rs = -mean * std::log1p(-u * (1.0 - std::exp(-r / mean)));
    const double k = rs / r;
    pointcloud::LidarPoint s;
    s.x = p.x * k;
    s.y = p.y * k;
    s.z = p.z * k;
    s.reflectance = lam_lo + (lam_hi - lam_lo) * unit(rng);
    s.fg = false;
    out.push_back(s);
  }
  return out;
}

pointcloud::RadarCloud simulate_fog(const pointcloud::RadarCloud & cloud, const FogParams & params)
{
  params.validate();
  return cloud;
}

}  // namespace fusionlab::fogsim
