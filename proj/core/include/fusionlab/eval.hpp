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

#ifndef FUSIONLAB__EVAL_HPP_
#define FUSIONLAB__EVAL_HPP_

#include <array>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fusionlab/box.hpp"
#include "fusionlab/pointcloud.hpp"

namespace fusionlab::eval
{

struct IouResult
{
  double value{0.0};
  bool degenerate{false};  // one of the boxes has zero footprint or height
};

double polygon_area(std::span<const Vec2> polygon);

/// Sutherland-Hodgman clipping of a polygon against a convex, counter-clockwise clip polygon.
std::vector<Vec2> clip_convex(std::span<const Vec2> subject, std::span<const Vec2> clip);

double bev_intersection_area(const Box3D & a, const Box3D & b);

/// Rotated footprint IoU.
IouResult iou_bev(const Box3D & a, const Box3D & b);

/// Footprint intersection times vertical overlap over the union volume.
IouResult iou_3d(const Box3D & a, const Box3D & b);

enum class IouKind { bev, box3d };

double iou(const Box3D & a, const Box3D & b, IouKind kind);

struct EvalConfig
{
  std::array<double, kNumClasses> iou_threshold{0.5, 0.25, 0.25};
  int recall_positions{40};
  /// Only ground truth and detections whose centers fall in this area count.
  std::optional<pointcloud::CloudBounds> area;
  /// Range-based stratum [near, far) on the horizontal center distance; stands
  /// in for occlusion/truncation difficulty levels.
  std::optional<std::pair<double, double>> range_stratum;

  void validate() const;
};

/// Sampled recall levels {1/N, ..., N/N}.
std::vector<double> recall_levels(int positions);
/// KITTI's legacy 11-point grid {0, 0.1, ..., 1}.
std::vector<double> recall_levels_11();

/// Per-detection outcome after greedy matching.
struct ScoredMatch
{
  double score{0.0};
  bool true_positive{false};
};

/// Greedy matching inside one frame for one class: detections in descending
/// score order each take the unmatched ground truth of highest IoU at or above
/// `threshold` (ties go to the lower gt index).
std::vector<ScoredMatch> match_frame(
  const DetectionSet & dets, const DetectionSet & gts, int class_id, double threshold,
  IouKind kind);

/// Interpolated AP (percent) from pooled matches; p(r) = max precision at
/// recall >= r, averaged over `levels`.
double interpolated_ap(
  std::vector<ScoredMatch> matches, std::size_t num_gt, std::span<const double> levels);

/// AP over `recall_positions` recall thresholds for one class, pooled over
/// frames. Absent when the class has no ground truth.
std::optional<double> ap_r40(
  std::span<const DetectionSet> dets, std::span<const DetectionSet> gts, int class_id,
  const EvalConfig & cfg, IouKind kind);

/// Same matching, 11-point interpolation.
std::optional<double> ap_r11(
  std::span<const DetectionSet> dets, std::span<const DetectionSet> gts, int class_id,
  const EvalConfig & cfg, IouKind kind);

/// Mean AP over classes that have ground truth; absent when none do.
std::optional<double> mean_ap(
  std::span<const DetectionSet> dets, std::span<const DetectionSet> gts, const EvalConfig & cfg,
  IouKind kind);

/// Weather tag for a fog level: "normal" for 0, "fog_level_k" otherwise.
std::string weather_tag(int fog_level);

struct FrameResult
{
  std::string frame_id;
  std::string weather;
  DetectionSet detections;
  DetectionSet ground_truth;
};

struct ReportEntry
{
  std::string class_name;  // a class or "mAP"
  std::string weather;     // a tag or "Total"
  std::string metric;      // "ap_bev" or "ap_3d"
  std::optional<double> value;
};

struct WeatherReport
{
  std::vector<std::string> weathers;  // first-appearance order, then "Total"
  std::vector<ReportEntry> entries;

  std::optional<double> get(
    const std::string & class_name, const std::string & weather, const std::string & metric) const;
  std::string to_json() const;
  std::string to_text() const;
};

/// Per-tag AP for every class and metric plus a pooled "Total" column.
WeatherReport weather_report(std::span<const FrameResult> frames, const EvalConfig & cfg);

}  // namespace fusionlab::eval

#endif  // FUSIONLAB__EVAL_HPP_
