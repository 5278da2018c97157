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

#include "fusionlab/detect.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fusionlab/error.hpp"
#include "fusionlab/eval.hpp"
#include "fusionlab/ops.hpp"

namespace fusionlab::detect
{

namespace ts = fusionlab::tensor;

void AnchorConfig::validate() const
{
  for (int c = 0; c < kNumClasses; ++c) {
    const auto i = static_cast<std::size_t>(c);
    const std::string name = class_name(c);
    const auto & s = sizes[i];
    if (!(s.l > 0.0 && s.w > 0.0 && s.h > 0.0)) {
      throw ConfigError("detect.anchor." + name, "anchor dimensions must be > 0");
    }
    if (!(negative_iou[i] >= 0.0 && negative_iou[i] <= positive_iou[i] && positive_iou[i] <= 1.0)) {
      throw ConfigError(
        "detect.iou." + name, "need 0 <= negative_iou <= positive_iou <= 1");
    }
  }
}

AnchorGrid::AnchorGrid(
  std::size_t height, std::size_t width, double x_min_, double y_min_, double cell_x_,
  double cell_y_, AnchorConfig config)
: x_min(x_min_), y_min(y_min_), cell_x(cell_x_), cell_y(cell_y_), height_(height), width_(width),
  config_(config)
{
  config_.validate();
  if (height == 0 || width == 0) {
    throw ShapeError("anchor grid must have at least one cell");
  }
  if (!(cell_x > 0.0 && cell_y > 0.0)) {
    throw ConfigError("detect.cell", "anchor cell size must be > 0");
  }
}

Box3D AnchorGrid::anchor(std::size_t index) const
{
  const std::size_t slot = index / cells();
  const std::size_t cell = index % cells();
  const std::size_t row = cell / width_;
  const std::size_t col = cell % width_;
  const int cls = class_of_slot(slot);
  const auto & s = config_.sizes[static_cast<std::size_t>(cls)];
  Box3D b;
  b.cx = x_min + (static_cast<double>(col) + 0.5) * cell_x;
  b.cy = y_min + (static_cast<double>(row) + 0.5) * cell_y;
  b.cz = s.z;
  b.l = s.l;
  b.w = s.w;
  b.h = s.h;
  b.yaw = config_.yaws[slot % kYawsPerClass];
  b.class_id = cls;
  b.score = 1.0;
  return b;
}

std::vector<Box3D> AnchorGrid::all() const
{
  std::vector<Box3D> out;
  out.reserve(size());
  for (std::size_t i = 0; i < size(); ++i) {
    out.push_back(anchor(i));
  }
  return out;
}

std::array<double, kBoxParams> encode(const Box3D & gt, const Box3D & anchor)
{
  const double diag = std::hypot(anchor.l, anchor.w);
  return {
    (gt.cx - anchor.cx) / diag,
    (gt.cy - anchor.cy) / diag,
    (gt.cz - anchor.cz) / anchor.h,
    std::log(gt.l / anchor.l),
    std::log(gt.w / anchor.w),
    std::log(gt.h / anchor.h),
    normalize_yaw(gt.yaw - anchor.yaw)};
}

Box3D decode(const Box3D & anchor, const std::array<double, kBoxParams> & t)
{
  const double diag = std::hypot(anchor.l, anchor.w);
  Box3D b;
  b.cx = anchor.cx + t[0] * diag;
  b.cy = anchor.cy + t[1] * diag;
  b.cz = anchor.cz + t[2] * anchor.h;
  b.l = anchor.l * std::exp(t[3]);
  b.w = anchor.w * std::exp(t[4]);
  b.h = anchor.h * std::exp(t[5]);
  b.yaw = normalize_yaw(anchor.yaw + t[6]);
  b.class_id = anchor.class_id;
  b.score = anchor.score;
  return b;
}

Targets assign_targets(const AnchorGrid & anchors, const DetectionSet & gts)
{
  const std::size_t n = anchors.size();
  const std::size_t cells = anchors.cells();
  const auto & cfg = anchors.config();
  std::vector<double> best_iou(n, 0.0);
  Targets t;
  t.matched_gt.assign(n, -1);

  // Per gt: its best anchor, for forced matches.
  std::vector<std::size_t> gt_best(gts.size(), n);
  std::vector<double> gt_best_iou(gts.size(), 0.0);

  for (std::size_t g = 0; g < gts.size(); ++g) {
    const Box3D & gt = gts[g];
    if (gt.class_id < 0 || gt.class_id >= kNumClasses) {
      continue;
    }
    const auto & size = cfg.sizes[static_cast<std::size_t>(gt.class_id)];
    const double reach = 0.5 * std::hypot(gt.l, gt.w) + 0.5 * std::hypot(size.l, size.w);
    const auto lo = [](double v) { return static_cast<long>(std::floor(v)); };
    const long col_lo = std::max(0L, lo((gt.cx - reach - anchors.x_min) / anchors.cell_x));
    const long col_hi = std::min(
      static_cast<long>(anchors.width()) - 1, lo((gt.cx + reach - anchors.x_min) / anchors.cell_x));
    const long row_lo = std::max(0L, lo((gt.cy - reach - anchors.y_min) / anchors.cell_y));
    const long row_hi = std::min(
      static_cast<long>(anchors.height()) - 1,
      lo((gt.cy + reach - anchors.y_min) / anchors.cell_y));
    for (std::size_t y = 0; y < kYawsPerClass; ++y) {
      const std::size_t slot = static_cast<std::size_t>(gt.class_id) * kYawsPerClass + y;
      for (long r = row_lo; r <= row_hi; ++r) {
        for (long c = col_lo; c <= col_hi; ++c) {
          const std::size_t idx =
            slot * cells + static_cast<std::size_t>(r) * anchors.width() + static_cast<std::size_t>(c);
          const double v = eval::iou_bev(anchors.anchor(idx), gt).value;
          if (v > best_iou[idx]) {
            best_iou[idx] = v;
            t.matched_gt[idx] = static_cast<int>(g);
          }
          if (v > gt_best_iou[g]) {
            gt_best_iou[g] = v;
            gt_best[g] = idx;
          }
        }
      }
    }
  }

  t.label.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto cls = static_cast<std::size_t>(AnchorGrid::class_of_slot(i / cells));
    if (t.matched_gt[i] >= 0 && best_iou[i] >= cfg.positive_iou[cls]) {
      t.label[i] = 1;
    } else if (best_iou[i] >= cfg.negative_iou[cls]) {
      t.label[i] = -1;
    }
  }
  if (cfg.force_match) {
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (gt_best[g] < n) {
        t.label[gt_best[g]] = 1;
        t.matched_gt[gt_best[g]] = static_cast<int>(g);
      }
    }
  }

  t.cls_target.assign(n, 0.0);
  t.cls_weight.assign(n, 1.0);
  t.reg_target.assign(n * kBoxParams, 0.0);
  t.reg_weight.assign(n * kBoxParams, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (t.label[i] == 1) {
      ++t.num_pos;
      t.cls_target[i] = 1.0;
      const std::size_t slot = i / cells;
      const std::size_t cell = i % cells;
      const auto d = encode(gts[static_cast<std::size_t>(t.matched_gt[i])], anchors.anchor(i));
      for (std::size_t k = 0; k < kBoxParams; ++k) {
        const std::size_t at = (slot * kBoxParams + k) * cells + cell;
        t.reg_target[at] = d[k];
        t.reg_weight[at] = 1.0;
      }
    } else {
      t.matched_gt[i] = -1;
      if (t.label[i] == -1) {
        t.cls_weight[i] = 0.0;
      }
    }
  }
  return t;
}

LossParts detection_losses(
  Tape & tape, const Tensor & cls_logits, const Tensor & reg_preds, const Targets & targets,
  const LossOptions & options)
{
  const std::size_t n = targets.cls_target.size();
  if (cls_logits.numel() != n) {
    throw ShapeError(
      "classification map has " + std::to_string(cls_logits.numel()) + " entries for " +
      std::to_string(n) + " anchors");
  }
  if (reg_preds.numel() != n * kBoxParams) {
    throw ShapeError(
      "regression map has " + std::to_string(reg_preds.numel()) + " entries, expected " +
      std::to_string(n * kBoxParams));
  }
  const double norm = 1.0 / static_cast<double>(std::max<std::size_t>(1, targets.num_pos));
  std::vector<double> cls_w(targets.cls_weight);
  for (double & w : cls_w) {
    w *= norm;
  }
  std::vector<double> reg_w(targets.reg_weight);
  for (double & w : reg_w) {
    w *= norm;
  }
  const std::size_t cells = n / kAnchorsPerCell;
  std::vector<std::uint8_t> sine(n * kBoxParams, 0);
  for (std::size_t slot = 0; slot < kAnchorsPerCell; ++slot) {
    const std::size_t base = (slot * kBoxParams + 6) * cells;
    std::fill(sine.begin() + static_cast<std::ptrdiff_t>(base),
              sine.begin() + static_cast<std::ptrdiff_t>(base + cells), 1);
  }
  LossParts parts;
  parts.cls = ts::sigmoid_focal_loss(
    tape, cls_logits, targets.cls_target, cls_w, options.focal_alpha, options.focal_gamma);
  parts.loc = ts::smooth_l1_loss(
    tape, reg_preds, targets.reg_target, reg_w, options.smooth_l1_beta, sine);
  return parts;
}

Tensor combine_losses(
  Tape & tape, const Tensor & l_cls, const Tensor & l_loc, const Tensor & l_fad,
  const LossWeights & weights)
{
  const Tensor a = ts::scale(tape, l_cls, weights.cls);
  const Tensor b = ts::scale(tape, l_loc, weights.loc);
  const Tensor c = ts::scale(tape, l_fad, weights.fad);
  return ts::add(tape, ts::add(tape, a, b), c);
}

Tensor total_loss(
  Tape & tape, const Tensor & cls_logits, const Tensor & reg_preds, const Targets & targets,
  const Tensor & fad_loss_value, const LossWeights & weights, const LossOptions & options)
{
  const LossParts parts = detection_losses(tape, cls_logits, reg_preds, targets, options);
  return combine_losses(tape, parts.cls, parts.loc, fad_loss_value, weights);
}

DetectionSet nms(DetectionSet boxes, double iou_threshold)
{
  std::stable_sort(boxes.begin(), boxes.end(), [](const Box3D & a, const Box3D & b) {
    return a.score > b.score;
  });
  DetectionSet kept;
  for (const auto & b : boxes) {
    bool suppressed = false;
    for (const auto & k : kept) {
      if (k.class_id == b.class_id && eval::iou_bev(k, b).value >= iou_threshold) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) {
      kept.push_back(b);
    }
  }
  return kept;
}

DetectionSet decode_and_nms(
  const Tensor & cls_logits, const Tensor & reg_preds, const AnchorGrid & anchors,
  const DecodeOptions & options)
{
  const std::size_t n = anchors.size();
  const std::size_t cells = anchors.cells();
  if (cls_logits.numel() != n || reg_preds.numel() != n * kBoxParams) {
    throw ShapeError(
      "head outputs (" + std::to_string(cls_logits.numel()) + ", " +
      std::to_string(reg_preds.numel()) + ") do not match " + std::to_string(n) + " anchors");
  }
  const auto logits = cls_logits.data();
  const auto reg = reg_preds.data();
  std::vector<std::pair<double, std::size_t>> candidates;
  for (std::size_t i = 0; i < n; ++i) {
    const double score = 1.0 / (1.0 + std::exp(-logits[i]));
    if (score >= options.score_threshold) {
      candidates.emplace_back(score, i);
    }
  }
  std::stable_sort(candidates.begin(), candidates.end(), [](const auto & a, const auto & b) {
    return a.first > b.first;
  });
  if (candidates.size() > options.pre_nms_top_k) {
    candidates.resize(options.pre_nms_top_k);
  }
  DetectionSet boxes;
  boxes.reserve(candidates.size());
  for (const auto & [score, i] : candidates) {
    const std::size_t slot = i / cells;
    const std::size_t cell = i % cells;
    std::array<double, kBoxParams> d{};
    for (std::size_t k = 0; k < kBoxParams; ++k) {
      d[k] = reg[(slot * kBoxParams + k) * cells + cell];
    }
    Box3D b = decode(anchors.anchor(i), d);
    b.score = score;
    boxes.push_back(b);
  }
  DetectionSet out = nms(std::move(boxes), options.nms_iou);
  if (out.size() > options.max_detections) {
    out.resize(options.max_detections);
  }
  return out;
}

}  // namespace fusionlab::detect
