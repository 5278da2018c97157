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

#include <algorithm>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "fusionlab/error.hpp"
#include "fusionlab/mme.hpp"
#include "oracles.hpp"

namespace
{

using namespace fusionlab;
using fusionlab::testing::CellKey;

mme::PillarGridSpec small_grid()
{
  mme::PillarGridSpec spec;
  spec.bounds = pointcloud::CloudBounds{0.0, 4.0, -2.0, 2.0, -3.0, 1.0};
  spec.cell_x = 0.8;
  spec.cell_y = 0.8;
  return spec;
}

struct Clouds
{
  pointcloud::LidarCloud lidar;
  pointcloud::RadarCloud radar;
};

// Points spill slightly outside the grid so the bounds check is exercised.
Clouds random_clouds(std::size_t n_lidar, std::size_t n_radar, std::uint64_t seed)
{
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> x(-0.3, 4.3);
  std::uniform_real_distribution<double> y(-2.3, 2.3);
  std::uniform_real_distribution<double> z(-3.2, 1.2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> v(0.0, 5.0);
  Clouds c;
  for (std::size_t i = 0; i < n_lidar; ++i) {
    c.lidar.push_back({x(rng), y(rng), z(rng), u(rng), std::nullopt});
  }
  // Radar only covers the left half, so some cells are LiDAR-only.
  std::uniform_real_distribution<double> ry(-2.0, 0.4);
  for (std::size_t i = 0; i < n_radar; ++i) {
    c.radar.push_back({x(rng), ry(rng), z(rng) * 0.5, v(rng), v(rng), 20 * u(rng) - 10, std::nullopt});
  }
  return c;
}

void expect_rows_near(const std::vector<mme::Row> & got, const std::vector<std::vector<double>> & want)
{
  ASSERT_EQ(got.size(), want.size());
  for (std::size_t i = 0; i < got.size(); ++i) {
    ASSERT_EQ(got[i].size(), want[i].size());
    for (std::size_t k = 0; k < got[i].size(); ++k) {
      EXPECT_NEAR(got[i][k], want[i][k], 1e-12) << "row " << i << " column " << k;
    }
  }
}

TEST(PillarTest, GroupingMatchesHashMapOracle)
{
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto c = random_clouds(400, 60, seed);
    const auto spec = small_grid();
    const auto pillars = mme::pillarize(c.lidar, c.radar, spec);
    const auto cells = fusionlab::testing::group_cells(c.lidar, c.radar, spec);
    ASSERT_EQ(pillars.size(), cells.size());
    std::size_t i = 0;
    for (const auto & [key, cell] : cells) {
      EXPECT_EQ(pillars[i].row, key.first);
      EXPECT_EQ(pillars[i].col, key.second);
      EXPECT_EQ(pillars[i].lidar_rows.size(), cell.lidar.size());
      EXPECT_EQ(pillars[i].radar_rows.size(), cell.radar.size());
      for (const auto & r : pillars[i].lidar_rows) {
        EXPECT_EQ(r.size(), mme::kLidarRawWidth);
      }
      for (const auto & r : pillars[i].radar_rows) {
        EXPECT_EQ(r.size(), mme::kRadarRawWidth);
      }
      ++i;
    }
  }
}

TEST(PillarTest, CapsMatchOracle)
{
  const auto c = random_clouds(400, 200, 4);
  auto spec = small_grid();
  spec.max_points_per_pillar = 3;
  spec.max_pillars = 7;
  const auto pillars = mme::pillarize(c.lidar, c.radar, spec);
  const auto cells = fusionlab::testing::group_cells(c.lidar, c.radar, spec);
  ASSERT_EQ(pillars.size(), 7u);
  ASSERT_EQ(cells.size(), 7u);
  std::size_t i = 0;
  for (const auto & [key, cell] : cells) {
    EXPECT_EQ(CellKey(pillars[i].row, pillars[i].col), key);
    EXPECT_LE(pillars[i].lidar_rows.size(), 3u);
    EXPECT_EQ(pillars[i].lidar_rows.size(), cell.lidar.size());
    EXPECT_EQ(pillars[i].radar_rows.size(), cell.radar.size());
    ++i;
  }
}

TEST(PillarTest, BidirectionalFusionMatchesPerCellMeans)
{
  const auto c = random_clouds(300, 80, 5);
  const auto spec = small_grid();
  const auto fused = mme::bidirectional_fuse(mme::pillarize(c.lidar, c.radar, spec));
  const auto cells = fusionlab::testing::group_cells(c.lidar, c.radar, spec);
  ASSERT_EQ(fused.size(), cells.size());
  std::size_t i = 0;
  std::size_t both = 0;
  for (const auto & [key, cell] : cells) {
    const bool has_both = !cell.lidar.empty() && !cell.radar.empty();
    both += has_both;
    EXPECT_EQ(fused[i].fused, has_both);
    expect_rows_near(fused[i].lidar_rows, fusionlab::testing::expected_fused_lidar_rows(cell, key, spec));
    expect_rows_near(fused[i].radar_rows, fusionlab::testing::expected_fused_radar_rows(cell, key, spec));
    ++i;
  }
  EXPECT_GT(both, 0u);
  EXPECT_LT(both, cells.size());
}

TEST(PillarTest, WideningWithoutFusionLeavesCrossFieldsEmpty)
{
  const auto c = random_clouds(200, 80, 6);
  const auto spec = small_grid();
  const auto pillars = mme::pillarize(c.lidar, c.radar, spec);
  const auto wide = mme::widen_unfused(pillars);
  const auto fused = mme::bidirectional_fuse(pillars);
  ASSERT_EQ(wide.size(), fused.size());
  for (std::size_t i = 0; i < wide.size(); ++i) {
    EXPECT_FALSE(wide[i].fused);
    for (std::size_t r = 0; r < wide[i].lidar_rows.size(); ++r) {
      const auto & w = wide[i].lidar_rows[r];
      const auto & f = fused[i].lidar_rows[r];
      for (std::size_t k : {mme::col::radar_offset, mme::col::radar_offset + 1,
                            mme::col::radar_offset + 2, mme::col::velocity,
                            mme::col::velocity + 1, mme::col::rcs, mme::col::presence}) {
        EXPECT_EQ(w[k], 0.0);
      }
      for (std::size_t k : {mme::col::x, mme::col::x + 1, mme::col::x + 2, mme::col::lidar_offset,
                            mme::col::center, mme::col::reflectance}) {
        EXPECT_EQ(w[k], f[k]);
      }
    }
    for (const auto & w : wide[i].radar_rows) {
      EXPECT_EQ(w[mme::col::lidar_offset], 0.0);
      EXPECT_EQ(w[mme::col::reflectance], 0.0);
      EXPECT_EQ(w[mme::col::presence], 0.0);
    }
  }
}

TEST(PillarTest, EncoderScattersMaxPooledFeaturesAndLeavesEmptyCellsZero)
{
  const auto c = random_clouds(150, 40, 7);
  const auto spec = small_grid();
  std::mt19937_64 rng(8);
  const mme::PillarEncoder enc_l(6, rng);
  const mme::PillarEncoder enc_r(6, rng);
  const auto fused = mme::bidirectional_fuse(mme::pillarize(c.lidar, c.radar, spec));
  auto tape = tensor::Tape::inference();
  const auto bev = mme::pillars_to_bev(tape, fused, enc_l, enc_r, spec);
  const std::size_t h = spec.rows();
  const std::size_t w = spec.cols();
  EXPECT_EQ(bev.f_l.shape(), (tensor::Shape{6, h, w}));
  EXPECT_EQ(bev.f_r.shape(), (tensor::Shape{6, h, w}));

  const auto & wl = enc_l.linear.weight.data();
  const auto & bl = enc_l.linear.bias.data();
  std::vector<std::uint8_t> occupied(h * w, 0);
  for (const auto & p : fused) {
    const std::size_t cell = p.row * w + p.col;
    occupied[cell] = p.lidar_rows.empty() ? 0 : 1;
    EXPECT_EQ(bev.lidar_occupancy[cell], occupied[cell]);
    EXPECT_EQ(bev.radar_occupancy[cell], p.radar_rows.empty() ? 0 : 1);
    if (p.lidar_rows.empty()) {
      continue;
    }
    std::vector<double> x;
    for (const auto & r : p.lidar_rows) {
      for (std::size_t k = 0; k < mme::kFusedWidth; ++k) {
        x.push_back(r[k] * enc_l.feature_scale[k]);
      }
    }
    const auto y = fusionlab::testing::loop_linear(
      x, p.lidar_rows.size(), mme::kFusedWidth, std::vector<double>(wl.begin(), wl.end()), 6,
      std::vector<double>(bl.begin(), bl.end()));
    for (std::size_t ch = 0; ch < 6; ++ch) {
      double best = 0.0;  // ReLU before the max
      for (std::size_t i = 0; i < p.lidar_rows.size(); ++i) {
        best = std::max(best, y[i * 6 + ch]);
      }
      EXPECT_NEAR(bev.f_l.at(ch * h * w + cell), best, 1e-12);
    }
  }
  for (std::size_t cell = 0; cell < h * w; ++cell) {
    if (!occupied[cell]) {
      for (std::size_t ch = 0; ch < 6; ++ch) {
        EXPECT_EQ(bev.f_l.at(ch * h * w + cell), 0.0);
      }
    }
  }
}

TEST(PillarTest, InvalidGridIsAConfigError)
{
  auto spec = small_grid();
  spec.cell_x = 0.0;
  EXPECT_THROW(mme::pillarize({}, {}, spec), ConfigError);
  spec = small_grid();
  EXPECT_EQ(spec.rows(), 5u);
  EXPECT_EQ(spec.cols(), 5u);
  EXPECT_TRUE(mme::pillarize({}, {}, spec).empty());
}

}  // namespace
