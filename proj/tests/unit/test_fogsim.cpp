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

#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <string>

#include <gtest/gtest.h>

#include "fusionlab/dataset.hpp"
#include "fusionlab/error.hpp"
#include "fusionlab/fogsim.hpp"
#include "fusionlab/scenegen.hpp"

namespace
{

using namespace fusionlab;
using pointcloud::LidarCloud;

LidarCloud ring_cloud(std::size_t n, std::uint64_t seed)
{
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> range(1.0, 40.0);
  std::uniform_real_distribution<double> angle(-1.5, 1.5);
  std::uniform_real_distribution<double> refl(0.05, 1.0);
  LidarCloud cloud;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = range(rng);
    const double a = angle(rng);
    cloud.push_back({r * std::cos(a), r * std::sin(a), -1.0, refl(rng), true});
  }
  return cloud;
}

TEST(FogTest, LevelZeroIsIdentity)
{
  const auto cloud = ring_cloud(200, 1);
  EXPECT_EQ(fogsim::simulate_fog(cloud, fogsim::fog_level_params(0, 5)), cloud);
}

TEST(FogTest, SurvivorsAreAttenuatedByTwoWayBeerLambert)
{
  const auto cloud = ring_cloud(500, 2);
  auto p = fogsim::fog_level_params(3, 9);
  p.scatter_rate = 0.0;
  const auto out = fogsim::simulate_fog(cloud, p);
  std::size_t j = 0;
  for (const auto & q : cloud) {
    const double expected = q.reflectance * std::exp(-2.0 * p.alpha * pointcloud::range_of(q));
    if (expected < p.min_reflectance) {
      continue;
    }
    ASSERT_LT(j, out.size());
    EXPECT_EQ(out[j].x, q.x);
    EXPECT_DOUBLE_EQ(out[j].reflectance, expected);
    ++j;
  }
  EXPECT_EQ(j, out.size());
}

TEST(FogTest, ScatteredReturnsAreBackgroundOnTheSameRayAndCloser)
{
  const auto cloud = ring_cloud(2000, 3);
  auto p = fogsim::fog_level_params(4, 11);
  p.scatter_rate = 1.0;
  const auto out = fogsim::simulate_fog(cloud, p);
  std::size_t scattered = 0;
  for (const auto & q : out) {
    if (q.fg == std::optional<bool>(false)) {
      ++scattered;
      EXPECT_GE(q.reflectance, p.min_reflectance);
      EXPECT_LE(q.reflectance, p.scatter_reflectance_max);
    }
  }
  EXPECT_GT(scattered, 0u);
  // Every scatter point lies on the ray of one lost return, strictly closer.
  std::size_t i = 0;
  for (const auto & q : cloud) {
    const double kept = q.reflectance * std::exp(-2.0 * p.alpha * pointcloud::range_of(q));
    ASSERT_LT(i, out.size());
    if (kept < p.min_reflectance) {
      const auto & s = out[i];
      EXPECT_EQ(s.fg, std::optional<bool>(false));
      const double k = pointcloud::range_of(s) / pointcloud::range_of(q);
      EXPECT_LT(k, 1.0);
      EXPECT_NEAR(s.x, q.x * k, 1e-9);
      EXPECT_NEAR(s.y, q.y * k, 1e-9);
    }
    ++i;
  }
}

TEST(FogTest, DeterministicInSeed)
{
  const auto cloud = ring_cloud(500, 4);
  const auto a = fogsim::simulate_fog(cloud, fogsim::fog_level_params(2, 21));
  const auto b = fogsim::simulate_fog(cloud, fogsim::fog_level_params(2, 21));
  const auto c = fogsim::simulate_fog(cloud, fogsim::fog_level_params(2, 22));
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
}

TEST(FogTest, DenserFogRemovesMoreOfASyntheticScene)
{
  scenegen::SceneSpec spec;
  const auto frames = dataset::generate_frames(spec, 10, 5);
  std::size_t prev_total = std::numeric_limits<std::size_t>::max();
  std::size_t prev_fg = std::numeric_limits<std::size_t>::max();
  std::size_t clear_fg = 0;
  for (int level = 0; level <= 4; ++level) {
    const auto fogged = dataset::with_fog(frames, level, 7);
    std::size_t total = 0;
    std::size_t fg = 0;
    for (const auto & f : fogged) {
      EXPECT_EQ(f.weather, level == 0 ? "normal" : "fog_level_" + std::to_string(level));
      total += f.lidar.size();
      for (const auto & p : f.lidar) {
        fg += p.fg == std::optional<bool>(true);
      }
    }
    EXPECT_LE(total, prev_total) << "level " << level;
    EXPECT_LE(fg, prev_fg) << "level " << level;
    if (level == 0) {
      clear_fg = fg;
    }
    prev_total = total;
    prev_fg = fg;
  }
  // Light fog may spare every object return inside the scene's short range;
  // the densest level must not.
  EXPECT_LT(prev_fg, clear_fg);
}

TEST(FogTest, RadarPassesThroughUnchanged)
{
  const pointcloud::RadarCloud radar{{5, 1, 0, 1, 2, 3, true}};
  EXPECT_EQ(fogsim::simulate_fog(radar, fogsim::fog_level_params(4, 0)), radar);
}

TEST(FogTest, InvalidParametersNameTheField)
{
  EXPECT_THROW(fogsim::fog_level_params(5), ConfigError);
  fogsim::FogParams p;
  p.scatter_rate = 1.5;
  try {
    fogsim::simulate_fog(LidarCloud{}, p);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError & e) {
    EXPECT_EQ(e.field(), "fog.scatter_rate");
  }
}

}  // namespace
