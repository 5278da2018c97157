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

#ifndef FUSIONLAB__DETECT_HPP_
#define FUSIONLAB__DETECT_HPP_

#include <array>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <vector>

#include "fusionlab/box.hpp"
#include "fusionlab/tensor.hpp"

// Single-scale anchor head: anchors, target assignment, losses, decoding and
// rotated BEV non-maximum suppression.
namespace fusionlab::detect
{

using tensor::Tape;
using tensor::Tensor;

constexpr std::size_t kBoxParams = 7;
constexpr std::size_t kYawsPerClass = 2;
constexpr std::size_t kAnchorsPerCell = static_cast<std::size_t>(kNumClasses) * kYawsPerClass;

struct AnchorSize
{
  double l{1.0};
  double w{1.0};
  double h{1.0};
  double z{0.0};  // center height
};

struct AnchorConfig
{
  /// Per class: car-like, pedestrian-like, cyclist-like, resting on z = -1.8.
  std::array<AnchorSize, kNumClasses> sizes{
    {{4.0, 1.8, 1.6, -1.0}, {0.8, 0.8, 1.7, -0.95}, {1.8, 0.8, 1.7, -0.95}}};
  std::array<double, kYawsPerClass> yaws{0.0, std::numbers::pi / 2.0};
  /// Anchors with BEV IoU >= positive_iou are positives, < negative_iou negatives.
  std::array<double, kNumClasses> positive_iou{0.6, 0.5, 0.5};
  std::array<double, kNumClasses> negative_iou{0.45, 0.35, 0.35};
  /// Each ground-truth box additionally claims its best-overlapping anchor.
  bool force_match{true};

  void validate() const;
};

/// One anchor set per BEV cell. Anchor a (= class * 2 + yaw index) at cell
/// (row, col) has flat index a * H * W + row * W + col, matching the channel
/// layout of the head's classification map; regression channel a * 7 + k holds
/// parameter k of that anchor.
class AnchorGrid
{
public:
  AnchorGrid(
    std::size_t height, std::size_t width, double x_min, double y_min, double cell_x,
    double cell_y, AnchorConfig config = {});

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t cells() const { return height_ * width_; }
  std::size_t size() const { return kAnchorsPerCell * cells(); }
  const AnchorConfig & config() const { return config_; }

  Box3D anchor(std::size_t index) const;
  std::vector<Box3D> all() const;
  static int class_of_slot(std::size_t slot) { return static_cast<int>(slot / kYawsPerClass); }

  double x_min{0.0};
  double y_min{0.0};
  double cell_x{0.4};
  double cell_y{0.4};

private:
  std::size_t height_;
  std::size_t width_;
  AnchorConfig config_;
};

/// Residual encoding: center offsets over the anchor diagonal (z over the
/// anchor height), log size ratios, and the wrapped yaw difference.
std::array<double, kBoxParams> encode(const Box3D & gt, const Box3D & anchor);
Box3D decode(const Box3D & anchor, const std::array<double, kBoxParams> & deltas);

struct Targets
{
  std::vector<std::int8_t> label;   // per anchor: 1 positive, 0 negative, -1 ignored
  std::vector<int> matched_gt;      // per anchor, -1 when unmatched
  std::vector<double> cls_target;   // per anchor
  std::vector<double> cls_weight;   // per anchor; 0 for ignored anchors
  std::vector<double> reg_target;   // 7 per anchor, head channel layout
  std::vector<double> reg_weight;   // 1 on the 7 channels of positives
  std::size_t num_pos{0};
};

/// Labels every anchor against the ground truth of its own class by BEV IoU.
Targets assign_targets(const AnchorGrid & anchors, const DetectionSet & gts);

struct LossOptions
{
  double focal_alpha{0.25};
  double focal_gamma{2.0};
  double smooth_l1_beta{1.0 / 9.0};
};

struct LossWeights
{
  double cls{1.0};
  double loc{2.0};
  double fad{0.5};
};

struct LossParts
{
  Tensor cls;  // focal loss over non-ignored anchors / max(1, positives)
  Tensor loc;  // smooth-L1 over positives / max(1, positives); yaw sine-wrapped
};

/// cls_logits: A x H x W, reg_preds: 7A x H x W.
LossParts detection_losses(
  Tape & tape, const Tensor & cls_logits, const Tensor & reg_preds, const Targets & targets,
  const LossOptions & options = {});

/// weights.cls * l_cls + weights.loc * l_loc + weights.fad * l_fad.
Tensor combine_losses(
  Tape & tape, const Tensor & l_cls, const Tensor & l_loc, const Tensor & l_fad,
  const LossWeights & weights = {});

/// Detection losses combined with an externally computed FAD loss.
Tensor total_loss(
  Tape & tape, const Tensor & cls_logits, const Tensor & reg_preds, const Targets & targets,
  const Tensor & fad_loss_value, const LossWeights & weights = {},
  const LossOptions & options = {});

struct DecodeOptions
{
  double score_threshold{0.3};
  double nms_iou{0.1};
  std::size_t pre_nms_top_k{500};
  std::size_t max_detections{100};
};

/// Class-wise greedy rotated-BEV NMS; output sorted by descending score.
DetectionSet nms(DetectionSet boxes, double iou_threshold);

DetectionSet decode_and_nms(
  const Tensor & cls_logits, const Tensor & reg_preds, const AnchorGrid & anchors,
  const DecodeOptions & options = {});

}  // namespace fusionlab::detect

#endif  // FUSIONLAB__DETECT_HPP_
