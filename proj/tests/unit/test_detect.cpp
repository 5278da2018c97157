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
#include <numbers>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "fusionlab/detect.hpp"
#include "fusionlab/error.hpp"
#include "fusionlab/eval.hpp"
#include "fusionlab/ops.hpp"

namespace
{

using namespace fusionlab;
using detect::AnchorGrid;
using tensor::Tape;
using tensor::Tensor;

AnchorGrid grid(detect::AnchorConfig cfg = {})
{
  return AnchorGrid(20, 24, 0.0, -5.0, 0.5, 0.5, cfg);
}

DetectionSet random_objects(std::uint64_t seed, std::size_t n)
{
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> x(-1.0, 13.0);  // some beyond the grid
  std::uniform_real_distribution<double> y(-6.0, 6.0);
  std::uniform_real_distribution<double> yaw(-std::numbers::pi, std::numbers::pi);
  std::uniform_real_distribution<double> jitter(0.85, 1.15);
  std::uniform_int_distribution<int> cls(0, kNumClasses - 1);
  const detect::AnchorConfig sizes;
  DetectionSet out;
  for (std::size_t i = 0; i < n; ++i) {
    const int c = cls(rng);
    const auto & s = sizes.sizes[static_cast<std::size_t>(c)];
    out.push_back(
      Box3D{x(rng), y(rng), s.z, s.l * jitter(rng), s.w * jitter(rng), s.h, yaw(rng), c, 1.0});
  }
  return out;
}

TEST(AnchorTest, LayoutIsSlotMajor)
{
  const auto anchors = grid();
  EXPECT_EQ(anchors.size(), detect::kAnchorsPerCell * 20 * 24);
  const std::size_t cells = anchors.cells();
  // Slot 3 = pedestrian at the second yaw; cell (row 2, col 5).
  const Box3D a = anchors.anchor(3 * cells + 2 * 24 + 5);
  EXPECT_EQ(a.class_id, 1);
  EXPECT_DOUBLE_EQ(a.yaw, std::numbers::pi / 2);
  EXPECT_DOUBLE_EQ(a.cx, 5.5 * 0.5);
  EXPECT_DOUBLE_EQ(a.cy, -5.0 + 2.5 * 0.5);
  EXPECT_DOUBLE_EQ(a.l, 0.8);
}

TEST(AnchorTest, EncodeDecodeRoundTrip)
{
  const auto anchors = grid();
  for (const auto & gt : random_objects(1, 30)) {
    const Box3D anchor = anchors.anchor(static_cast<std::size_t>(gt.class_id) * 2 * anchors.cells() + 17);
    const Box3D back = detect::decode(anchor, detect::encode(gt, anchor));
    EXPECT_NEAR(back.cx, gt.cx, 1e-12);
    EXPECT_NEAR(back.cy, gt.cy, 1e-12);
    EXPECT_NEAR(back.cz, gt.cz, 1e-12);
    EXPECT_NEAR(back.l, gt.l, 1e-12);
    EXPECT_NEAR(back.w, gt.w, 1e-12);
    EXPECT_NEAR(back.h, gt.h, 1e-12);
    EXPECT_NEAR(std::remainder(back.yaw - gt.yaw, 2 * std::numbers::pi), 0.0, 1e-12);
  }
}

// Full IoU matrix over every anchor and every object of the anchor's class.
detect::Targets brute_force_targets(const AnchorGrid & anchors, const DetectionSet & gts)
{
  const auto & cfg = anchors.config();
  const std::size_t n = anchors.size();
  detect::Targets t;
  t.label.assign(n, 0);
  t.matched_gt.assign(n, -1);
  std::vector<double> best(n, 0.0);
  std::vector<std::size_t> gt_best(gts.size(), n);
  std::vector<double> gt_best_iou(gts.size(), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const Box3D a = anchors.anchor(i);
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (gts[g].class_id != a.class_id) {
        continue;
      }
      const double v = eval::iou_bev(a, gts[g]).value;
      if (v > best[i]) {
        best[i] = v;
        t.matched_gt[i] = static_cast<int>(g);
      }
      if (v > gt_best_iou[g]) {
        gt_best_iou[g] = v;
        gt_best[g] = i;
      }
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto c = static_cast<std::size_t>(anchors.anchor(i).class_id);
    t.label[i] = best[i] >= cfg.positive_iou[c] ? 1 : best[i] >= cfg.negative_iou[c] ? -1 : 0;
  }
  for (std::size_t g = 0; g < gts.size(); ++g) {
    if (gt_best[g] < n) {
      t.label[gt_best[g]] = 1;
      t.matched_gt[gt_best[g]] = static_cast<int>(g);
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (t.label[i] != 1) {
      t.matched_gt[i] = -1;
    }
  }
  return t;
}

TEST(AssignTest, MatchesFullIouMatrix)
{
  const auto anchors = grid();
  for (std::uint64_t seed : {2u, 3u, 4u, 5u}) {
    const auto gts = random_objects(seed, 8);
    const auto got = detect::assign_targets(anchors, gts);
    const auto want = brute_force_targets(anchors, gts);
    EXPECT_EQ(got.label, want.label) << "seed " << seed;
    EXPECT_EQ(got.matched_gt, want.matched_gt) << "seed " << seed;
    std::size_t pos = 0;
    for (std::size_t i = 0; i < got.label.size(); ++i) {
      pos += got.label[i] == 1;
      EXPECT_EQ(got.cls_weight[i], got.label[i] == -1 ? 0.0 : 1.0);
      EXPECT_EQ(got.cls_target[i], got.label[i] == 1 ? 1.0 : 0.0);
    }
    EXPECT_EQ(got.num_pos, pos);
    EXPECT_GT(pos, 0u);
  }
}

TEST(AssignTest, RegressionTargetsUseHeadChannelLayout)
{
  const auto anchors = grid();
  const DetectionSet gts{Box3D{3.1, 0.2, -1.0, 4.2, 1.7, 1.5, 0.1, 0, 1.0}};
  const auto t = detect::assign_targets(anchors, gts);
  const std::size_t cells = anchors.cells();
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    if (t.label[i] != 1) {
      continue;
    }
    const auto d = detect::encode(gts[0], anchors.anchor(i));
    for (std::size_t k = 0; k < detect::kBoxParams; ++k) {
      const std::size_t at = ((i / cells) * detect::kBoxParams + k) * cells + i % cells;
      EXPECT_DOUBLE_EQ(t.reg_target[at], d[k]);
      EXPECT_EQ(t.reg_weight[at], 1.0);
    }
  }
}

TEST(AssignTest, ForcedMatchRescuesPoorlyAlignedObjects)
{
  // A small pedestrian, diagonal to both anchor yaws: its best BEV IoU with a
  // 0.8 x 0.8 anchor is at most 0.16 / 0.64, below the positive threshold.
  const DetectionSet gts{Box3D{3.25, 0.25, -0.95, 0.4, 0.4, 1.7, std::numbers::pi / 4, 1, 1.0}};
  detect::AnchorConfig cfg;
  cfg.force_match = false;
  EXPECT_EQ(detect::assign_targets(grid(cfg), gts).num_pos, 0u);
  EXPECT_EQ(detect::assign_targets(grid(), gts).num_pos, 1u);
}

Tensor map_of(std::size_t channels, const std::vector<double> & values)
{
  return Tensor::from({channels, 20, 24}, values, true);
}

TEST(LossTest, CombinationIsExactlyLinear)
{
  Tensor cls = Tensor::scalar(0.37, true);
  Tensor loc = Tensor::scalar(1.91, true);
  Tensor fad = Tensor::scalar(0.53, true);
  Tape tape;
  const Tensor total = detect::combine_losses(tape, cls, loc, fad);
  EXPECT_EQ(total.item(), 1.0 * 0.37 + 2.0 * 1.91 + 0.5 * 0.53);
  tape.backward(total);
  EXPECT_EQ(cls.grad()[0], 1.0);
  EXPECT_EQ(loc.grad()[0], 2.0);
  EXPECT_EQ(fad.grad()[0], 0.5);
}

TEST(LossTest, TotalIsTheWeightedSumOfParts)
{
  const auto anchors = grid();
  const auto targets = detect::assign_targets(anchors, random_objects(6, 5));
  std::mt19937_64 rng(7);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<double> logits(anchors.size());
  std::vector<double> reg(anchors.size() * detect::kBoxParams);
  for (double & v : logits) {
    v = noise(rng);
  }
  for (double & v : reg) {
    v = noise(rng);
  }
  const Tensor c = map_of(detect::kAnchorsPerCell, logits);
  const Tensor r = map_of(detect::kAnchorsPerCell * detect::kBoxParams, reg);
  auto tape = Tape::inference();
  const auto parts = detect::detection_losses(tape, c, r, targets);
  const Tensor f = Tensor::scalar(0.8);
  const double total = detect::total_loss(tape, c, r, targets, f).item();
  EXPECT_EQ(total, parts.cls.item() * 1.0 + parts.loc.item() * 2.0 + 0.8 * 0.5);
  EXPECT_GT(parts.loc.item(), 0.0);

  // Perfect regressions cost nothing.
  const Tensor exact = map_of(detect::kAnchorsPerCell * detect::kBoxParams, targets.reg_target);
  EXPECT_EQ(detect::detection_losses(tape, c, exact, targets).loc.item(), 0.0);
  EXPECT_THROW(detect::detection_losses(tape, Tensor::zeros({3}), r, targets), ShapeError);
}

TEST(NmsTest, SuppressesSameClassOverlapsInScoreOrder)
{
  const DetectionSet boxes{
    Box3D{0, 0, 0, 4, 2, 1.5, 0, 0, 0.6}, Box3D{0.2, 0, 0, 4, 2, 1.5, 0, 0, 0.9},
    Box3D{0.1, 0, 0, 4, 2, 1.5, 0, 1, 0.5}, Box3D{10, 0, 0, 4, 2, 1.5, 0, 0, 0.4}};
  const auto kept = detect::nms(boxes, 0.1);
  ASSERT_EQ(kept.size(), 3u);
  EXPECT_DOUBLE_EQ(kept[0].score, 0.9);
  EXPECT_EQ(kept[1].class_id, 1);
  EXPECT_DOUBLE_EQ(kept[2].cx, 10.0);
}

TEST(NmsTest, DecodingReturnsConfidentAnchors)
{
  const auto anchors = grid();
  std::vector<double> logits(anchors.size(), -10.0);
  const std::size_t best = 1 * anchors.cells() + 7 * 24 + 9;  // car, second yaw
  logits[best] = 2.0;
  const std::vector<double> reg(anchors.size() * detect::kBoxParams, 0.0);
  const auto dets = detect::decode_and_nms(
    map_of(detect::kAnchorsPerCell, logits),
    map_of(detect::kAnchorsPerCell * detect::kBoxParams, reg), anchors);
  ASSERT_EQ(dets.size(), 1u);
  Box3D want = anchors.anchor(best);
  want.score = 1.0 / (1.0 + std::exp(-2.0));
  EXPECT_EQ(dets[0].cx, want.cx);
  EXPECT_EQ(dets[0].cy, want.cy);
  EXPECT_EQ(dets[0].yaw, want.yaw);
  EXPECT_DOUBLE_EQ(dets[0].score, want.score);
}

}  // namespace
