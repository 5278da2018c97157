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

#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "fusionlab/error.hpp"
#include "fusionlab/eval.hpp"
#include "oracles.hpp"

namespace
{

using namespace fusionlab;
using eval::IouKind;

Box3D car(double x, double y, double yaw = 0.0, double score = 1.0)
{
  return Box3D{x, y, -1.0, 4.0, 1.8, 1.5, yaw, 0, score};
}

TEST(IouTest, OffsetUnitSquaresOverlapByExactlyOneHalf)
{
  // Intersection 2/3, union 4/3.
  const Box3D a{0, 0, 0, 1, 1, 1, 0, 0, 1};
  const Box3D b{1.0 / 3.0, 0, 0, 1, 1, 1, 0, 0, 1};
  EXPECT_NEAR(eval::iou_bev(a, b).value, 0.5, 1e-12);
  EXPECT_NEAR(eval::iou_3d(a, b).value, 0.5, 1e-12);
}

TEST(IouTest, ClosedFormCases)
{
  const Box3D a = car(0, 0);
  EXPECT_NEAR(eval::iou_bev(a, a).value, 1.0, 1e-12);
  EXPECT_DOUBLE_EQ(eval::iou_bev(a, car(10, 0)).value, 0.0);
  // A square rotated by a quarter turn is the same square.
  const Box3D sq{0, 0, 0, 2, 2, 2, 0, 0, 1};
  Box3D sq_rot = sq;
  sq_rot.yaw = std::numbers::pi / 2;
  EXPECT_NEAR(eval::iou_bev(sq, sq_rot).value, 1.0, 1e-12);
  // Same footprint, heights overlapping by half: 1 / 3.
  Box3D up = sq;
  up.cz = 1.0;
  EXPECT_NEAR(eval::iou_3d(sq, up).value, 1.0 / 3.0, 1e-12);
  EXPECT_NEAR(eval::iou_bev(sq, up).value, 1.0, 1e-12);
  // Vertically disjoint.
  up.cz = 5.0;
  EXPECT_DOUBLE_EQ(eval::iou_3d(sq, up).value, 0.0);
}

TEST(IouTest, DegenerateBoxesAreFlagged)
{
  Box3D flat = car(0, 0);
  flat.w = 0.0;
  const auto r = eval::iou_bev(flat, car(0, 0));
  EXPECT_TRUE(r.degenerate);
  EXPECT_EQ(r.value, 0.0);
  Box3D thin = car(0, 0);
  thin.h = 0.0;
  EXPECT_TRUE(eval::iou_3d(thin, car(0, 0)).degenerate);
  EXPECT_FALSE(eval::iou_bev(thin, car(0, 0)).degenerate);
}

TEST(IouTest, RotatedBoxesMatchMonteCarloArea)
{
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> pos(-1.5, 1.5);
  std::uniform_real_distribution<double> size(0.5, 4.0);
  std::uniform_real_distribution<double> yaw(-std::numbers::pi, std::numbers::pi);
  for (int i = 0; i < 12; ++i) {
    const Box3D a{pos(rng), pos(rng), pos(rng) * 0.3, size(rng), size(rng), size(rng), yaw(rng), 0, 1};
    const Box3D b{pos(rng), pos(rng), pos(rng) * 0.3, size(rng), size(rng), size(rng), yaw(rng), 0, 1};
    EXPECT_NEAR(eval::iou_bev(a, b).value, fusionlab::testing::monte_carlo_iou_bev(a, b, 200000, i), 1e-2)
      << "pair " << i;
    EXPECT_NEAR(eval::iou_3d(a, b).value, fusionlab::testing::monte_carlo_iou_3d(a, b, 200000, i), 1e-2)
      << "pair " << i;
  }
}

TEST(ApTest, StaircaseOfThreeDetections)
{
  // TP, FP, TP over two objects: precision 1, 1/2, 2/3 at recall 1/2, 1/2, 1.
  const std::vector<eval::ScoredMatch> m{{0.9, true}, {0.8, false}, {0.7, true}};
  const auto r40 = eval::recall_levels(40);
  EXPECT_NEAR(eval::interpolated_ap(m, 2, r40), 100.0 * (20 * 1.0 + 20 * (2.0 / 3.0)) / 40, 1e-12);
  const auto r11 = eval::recall_levels_11();
  EXPECT_NEAR(eval::interpolated_ap(m, 2, r11), 100.0 * (6 * 1.0 + 5 * (2.0 / 3.0)) / 11, 1e-12);
  // Unreached recall levels contribute nothing.
  EXPECT_NEAR(eval::interpolated_ap({{0.5, true}}, 4, r40), 100.0 * 10 / 40, 1e-12);
  EXPECT_EQ(eval::interpolated_ap({}, 3, r40), 0.0);
}

TEST(ApTest, GreedyMatchingByScoreAndBestIou)
{
  const DetectionSet gts{car(0, 0), car(0.0, 3.0)};
  // The top detection takes the first object even though a lower-scored one
  // overlaps it better; that better box is then a false positive.
  const DetectionSet dets{car(0.0, 0.5, 0, 0.9), car(0.0, 0.0, 0, 0.8), car(0, 3.0, 0, 0.7)};
  const auto m = eval::match_frame(dets, gts, 0, 0.5, IouKind::bev);
  ASSERT_EQ(m.size(), 3u);
  EXPECT_TRUE(m[0].true_positive);
  EXPECT_FALSE(m[1].true_positive);
  EXPECT_TRUE(m[2].true_positive);
  // Other classes are ignored.
  EXPECT_TRUE(eval::match_frame(dets, gts, 1, 0.5, IouKind::bev).empty());
}

TEST(ApTest, ClassesWithoutObjectsAreExcludedFromTheMean)
{
  const std::vector<DetectionSet> gts{{car(0, 0), car(10, 0)}};
  const std::vector<DetectionSet> dets{{car(0, 0, 0, 0.9)}};
  eval::EvalConfig cfg;
  EXPECT_NEAR(*eval::ap_r40(dets, gts, 0, cfg, IouKind::bev), 50.0, 1e-12);
  EXPECT_FALSE(eval::ap_r40(dets, gts, 1, cfg, IouKind::bev).has_value());
  EXPECT_NEAR(*eval::mean_ap(dets, gts, cfg, IouKind::bev), 50.0, 1e-12);
  EXPECT_THROW(
    eval::ap_r40(dets, std::vector<DetectionSet>{}, 0, cfg, IouKind::bev), ShapeError);
}

TEST(ApTest, AreaAndRangeFiltersDropObjectsAndDetections)
{
  const std::vector<DetectionSet> gts{{car(5, 0), car(30, 0)}};
  const std::vector<DetectionSet> dets{{car(5, 0, 0, 0.9), car(30, 8, 0, 0.8)}};
  eval::EvalConfig cfg;
  EXPECT_LT(*eval::ap_r40(dets, gts, 0, cfg, IouKind::bev), 100.0);
  cfg.area = pointcloud::CloudBounds{0, 20, -10, 10, -5, 5};
  EXPECT_NEAR(*eval::ap_r40(dets, gts, 0, cfg, IouKind::bev), 100.0, 1e-12);
  cfg.area.reset();
  cfg.range_stratum = std::make_pair(0.0, 10.0);
  EXPECT_NEAR(*eval::ap_r40(dets, gts, 0, cfg, IouKind::bev), 100.0, 1e-12);
  cfg.range_stratum = std::make_pair(20.0, 40.0);
  EXPECT_NEAR(*eval::ap_r40(dets, gts, 0, cfg, IouKind::bev), 0.0, 1e-12);
}

std::vector<eval::FrameResult> two_weather_frames()
{
  return {
    {"000000", "normal", {car(0, 0, 0, 0.9)}, {car(0, 0)}},
    {"000001", "fog_level_4", {car(10, 0, 0, 0.95), car(0, 0, 0, 0.2)}, {car(0, 0)}},
  };
}

TEST(ReportTest, TotalPoolsFramesRatherThanAveragingWeathers)
{
  const auto frames = two_weather_frames();
  eval::EvalConfig cfg;
  const auto report = eval::weather_report(frames, cfg);
  EXPECT_EQ(report.weathers, (std::vector<std::string>{"normal", "fog_level_4", "Total"}));
  std::vector<DetectionSet> dets;
  std::vector<DetectionSet> gts;
  for (const auto & f : frames) {
    dets.push_back(f.detections);
    gts.push_back(f.ground_truth);
  }
  const double pooled = *eval::ap_r40(dets, gts, 0, cfg, IouKind::bev);
  EXPECT_DOUBLE_EQ(*report.get("car", "Total", "ap_bev"), pooled);
  EXPECT_DOUBLE_EQ(*report.get("car", "normal", "ap_bev"), 100.0);
  EXPECT_DOUBLE_EQ(*report.get("car", "fog_level_4", "ap_bev"), 50.0);
  EXPECT_NE(pooled, 75.0);
  EXPECT_FALSE(report.get("pedestrian", "Total", "ap_3d").has_value());
}

TEST(ReportTest, JsonAndTextRenderings)
{
  const auto report = eval::weather_report(two_weather_frames(), eval::EvalConfig{});
  const auto j = nlohmann::json::parse(report.to_json());
  EXPECT_EQ(j.at("weathers").back(), "Total");
  EXPECT_EQ(j.at("entries").size(), 3u * 2u * (kNumClasses + 1));
  bool saw_null = false;
  for (const auto & e : j.at("entries")) {
    saw_null = saw_null || e.at("value").is_null();
  }
  EXPECT_TRUE(saw_null);

  const std::string text = report.to_text();
  EXPECT_EQ(text.rfind("class/metric", 0), 0u);
  EXPECT_NE(text.find("car ap_bev"), std::string::npos);
  EXPECT_NE(text.find("100.00"), std::string::npos);
  EXPECT_NE(text.find(" -"), std::string::npos);
}

}  // namespace
