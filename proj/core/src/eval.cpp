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

#include "fusionlab/eval.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <sstream>

#include "fusionlab/error.hpp"
#include <nlohmann/json.hpp>

namespace fusionlab::eval
{

double polygon_area(std::span<const Vec2> polygon)
{
  const std::size_t n = polygon.size();
  if (n < 3) {
    return 0.0;
  }
  double twice = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto & a = polygon[i];
    const auto & b = polygon[(i + 1) % n];
    twice += a.x * b.y - b.x * a.y;
  }
  return 0.5 * std::abs(twice);
}

namespace
{

double cross(const Vec2 & o, const Vec2 & a, const Vec2 & b)
{
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

Vec2 intersect(const Vec2 & p, const Vec2 & q, const Vec2 & a, const Vec2 & b)
{
  // Point on segment p->q where it crosses the infinite line a->b.
  const double dp = cross(a, b, p);
  const double dq = cross(a, b, q);
  const double t = dp / (dp - dq);
  return {p.x + t * (q.x - p.x), p.y + t * (q.y - p.y)};
}

bool degenerate(const Box3D & b) { return !(b.l > 0.0 && b.w > 0.0); }

}  // namespace

std::vector<Vec2> clip_convex(std::span<const Vec2> subject, std::span<const Vec2> clip)
{
  std::vector<Vec2> output(subject.begin(), subject.end());
  const std::size_t m = clip.size();
  for (std::size_t e = 0; e < m && !output.empty(); ++e) {
    const Vec2 & a = clip[e];
    const Vec2 & b = clip[(e + 1) % m];
    std::vector<Vec2> input;
    input.swap(output);
    for (std::size_t i = 0; i < input.size(); ++i) {
      const Vec2 & cur = input[i];
      const Vec2 & prev = input[(i + input.size() - 1) % input.size()];
      const bool cur_in = cross(a, b, cur) >= 0.0;
      const bool prev_in = cross(a, b, prev) >= 0.0;
      if (cur_in) {
        if (!prev_in) {
          output.push_back(intersect(prev, cur, a, b));
        }
        output.push_back(cur);
      } else if (prev_in) {
        output.push_back(intersect(prev, cur, a, b));
      }
    }
  }
  return output;
}

double bev_intersection_area(const Box3D & a, const Box3D & b)
{
  const double ra = 0.5 * std::hypot(a.l, a.w);
  const double rb = 0.5 * std::hypot(b.l, b.w);
  if (std::hypot(a.cx - b.cx, a.cy - b.cy) >= ra + rb) {
    return 0.0;
  }
  const auto pa = bev_corners(a);
  const auto pb = bev_corners(b);
  const auto poly = clip_convex(pa, pb);
  return polygon_area(poly);
}

IouResult iou_bev(const Box3D & a, const Box3D & b)
{
  if (degenerate(a) || degenerate(b)) {
    return {0.0, true};
  }
  const double inter = bev_intersection_area(a, b);
  const double uni = bev_area(a) + bev_area(b) - inter;
  return {std::clamp(inter / uni, 0.0, 1.0), false};
}

IouResult iou_3d(const Box3D & a, const Box3D & b)
{
  if (degenerate(a) || degenerate(b) || !(a.h > 0.0) || !(b.h > 0.0)) {
    return {0.0, true};
  }
  const double top = std::min(a.cz + 0.5 * a.h, b.cz + 0.5 * b.h);
  const double bottom = std::max(a.cz - 0.5 * a.h, b.cz - 0.5 * b.h);
  const double dz = top - bottom;
  if (dz <= 0.0) {
    return {0.0, false};
  }
  const double inter = bev_intersection_area(a, b) * dz;
  const double uni = bev_area(a) * a.h + bev_area(b) * b.h - inter;
  return {std::clamp(inter / uni, 0.0, 1.0), false};
}

double iou(const Box3D & a, const Box3D & b, IouKind kind)
{
  return kind == IouKind::bev ? iou_bev(a, b).value : iou_3d(a, b).value;
}

void EvalConfig::validate() const
{
  for (int c = 0; c < kNumClasses; ++c) {
    const double t = iou_threshold[static_cast<std::size_t>(c)];
    if (!(t > 0.0 && t <= 1.0)) {
      throw ConfigError(
        std::string("eval.iou_threshold.") + class_name(c), "must be in (0, 1]");
    }
  }
  if (recall_positions < 1) {
    throw ConfigError("eval.recall_positions", "must be >= 1");
  }
  if (area) {
    area->validate();
  }
  if (range_stratum && !(range_stratum->first < range_stratum->second)) {
    throw ConfigError("eval.range_stratum", "near must be < far");
  }
}

std::vector<double> recall_levels(int positions)
{
  std::vector<double> out;
  for (int k = 1; k <= positions; ++k) {
    out.push_back(static_cast<double>(k) / positions);
  }
  return out;
}

std::vector<double> recall_levels_11()
{
  std::vector<double> out;
  for (int k = 0; k <= 10; ++k) {
    out.push_back(k / 10.0);
  }
  return out;
}

std::vector<ScoredMatch> match_frame(
  const DetectionSet & dets, const DetectionSet & gts, int class_id, double threshold,
  IouKind kind)
{
  std::vector<std::size_t> gt_idx;
  for (std::size_t i = 0; i < gts.size(); ++i) {
    if (gts[i].class_id == class_id) {
      gt_idx.push_back(i);
    }
  }
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < dets.size(); ++i) {
    if (dets[i].class_id == class_id) {
      order.push_back(i);
    }
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return dets[a].score > dets[b].score;
  });
  std::vector<bool> taken(gt_idx.size(), false);
  std::vector<ScoredMatch> out;
  out.reserve(order.size());
  for (std::size_t di : order) {
    double best = -1.0;
    std::size_t best_g = gt_idx.size();
    for (std::size_t g = 0; g < gt_idx.size(); ++g) {
      if (taken[g]) {
        continue;
      }
      const double v = iou(dets[di], gts[gt_idx[g]], kind);
      if (v >= threshold && v > best) {
        best = v;
        best_g = g;
      }
    }
    const bool tp = best_g < gt_idx.size();
    if (tp) {
      taken[best_g] = true;
    }
    out.push_back({dets[di].score, tp});
  }
  return out;
}

double interpolated_ap(
  std::vector<ScoredMatch> matches, std::size_t num_gt, std::span<const double> levels)
{
  if (num_gt == 0 || levels.empty()) {
    return 0.0;
  }
  std::stable_sort(matches.begin(), matches.end(), [](const ScoredMatch & a, const ScoredMatch & b) {
    return a.score > b.score;
  });
  std::vector<double> precision;
  std::vector<double> recall;
  std::size_t tp = 0;
  for (std::size_t i = 0; i < matches.size(); ++i) {
    tp += matches[i].true_positive ? 1 : 0;
    precision.push_back(static_cast<double>(tp) / static_cast<double>(i + 1));
    recall.push_back(static_cast<double>(tp) / static_cast<double>(num_gt));
  }
  // Running maximum of precision from the tail.
  for (std::size_t i = precision.size(); i-- > 1;) {
    precision[i - 1] = std::max(precision[i - 1], precision[i]);
  }
  double total = 0.0;
  std::size_t cursor = 0;
  for (double r : levels) {
    while (cursor < recall.size() && recall[cursor] < r - 1e-12) {
      ++cursor;
    }
    if (cursor < recall.size()) {
      total += precision[cursor];
    }
  }
  return 100.0 * total / static_cast<double>(levels.size());
}

namespace
{

bool counts(const Box3D & b, const EvalConfig & cfg)
{
  if (cfg.area && !(b.cx >= cfg.area->x_min && b.cx < cfg.area->x_max &&
                    b.cy >= cfg.area->y_min && b.cy < cfg.area->y_max)) {
    return false;
  }
  if (cfg.range_stratum) {
    const double r = std::hypot(b.cx, b.cy);
    if (r < cfg.range_stratum->first || r >= cfg.range_stratum->second) {
      return false;
    }
  }
  return true;
}

DetectionSet filtered(const DetectionSet & boxes, int class_id, const EvalConfig & cfg)
{
  DetectionSet out;
  for (const auto & b : boxes) {
    if (b.class_id == class_id && counts(b, cfg)) {
      out.push_back(b);
    }
  }
  return out;
}

std::optional<double> pooled_ap(
  std::span<const DetectionSet> dets, std::span<const DetectionSet> gts, int class_id,
  const EvalConfig & cfg, IouKind kind, std::span<const double> levels)
{
  if (dets.size() != gts.size()) {
    throw ShapeError(
      "ap: " + std::to_string(dets.size()) + " detection frames vs " +
      std::to_string(gts.size()) + " ground-truth frames");
  }
  const double thr = cfg.iou_threshold[static_cast<std::size_t>(class_id)];
  std::vector<ScoredMatch> all;
  std::size_t num_gt = 0;
  for (std::size_t f = 0; f < gts.size(); ++f) {
    const auto g = filtered(gts[f], class_id, cfg);
    const auto d = filtered(dets[f], class_id, cfg);
    num_gt += g.size();
    auto m = match_frame(d, g, class_id, thr, kind);
    all.insert(all.end(), m.begin(), m.end());
  }
  if (num_gt == 0) {
    return std::nullopt;
  }
  return interpolated_ap(std::move(all), num_gt, levels);
}

}  // namespace

std::optional<double> ap_r40(
  std::span<const DetectionSet> dets, std::span<const DetectionSet> gts, int class_id,
  const EvalConfig & cfg, IouKind kind)
{
  const auto levels = recall_levels(cfg.recall_positions);
  return pooled_ap(dets, gts, class_id, cfg, kind, levels);
}

std::optional<double> ap_r11(
  std::span<const DetectionSet> dets, std::span<const DetectionSet> gts, int class_id,
  const EvalConfig & cfg, IouKind kind)
{
  const auto levels = recall_levels_11();
  return pooled_ap(dets, gts, class_id, cfg, kind, levels);
}

std::optional<double> mean_ap(
  std::span<const DetectionSet> dets, std::span<const DetectionSet> gts, const EvalConfig & cfg,
  IouKind kind)
{
  double total = 0.0;
  int n = 0;
  for (int c = 0; c < kNumClasses; ++c) {
    if (auto ap = ap_r40(dets, gts, c, cfg, kind)) {
      total += *ap;
      ++n;
    }
  }
  if (n == 0) {
    return std::nullopt;
  }
  return total / n;
}

std::string weather_tag(int fog_level)
{
  return fog_level == 0 ? "normal" : "fog_level_" + std::to_string(fog_level);
}

std::optional<double> WeatherReport::get(
  const std::string & class_name, const std::string & weather, const std::string & metric) const
{
  for (const auto & e : entries) {
    if (e.class_name == class_name && e.weather == weather && e.metric == metric) {
      return e.value;
    }
  }
  return std::nullopt;
}

namespace
{
const char * const kMetrics[2] = {"ap_bev", "ap_3d"};

std::vector<std::string> row_classes()
{
  std::vector<std::string> out;
  for (int c = 0; c < kNumClasses; ++c) {
    out.emplace_back(class_name(c));
  }
  out.emplace_back("mAP");
  return out;
}
}  // namespace

std::string WeatherReport::to_json() const
{
  nlohmann::ordered_json j;
  j["weathers"] = weathers;
  j["metrics"] = {kMetrics[0], kMetrics[1]};
  auto arr = nlohmann::ordered_json::array();
  for (const auto & e : entries) {
    nlohmann::ordered_json row;
    row["class"] = e.class_name;
    row["weather"] = e.weather;
    row["metric"] = e.metric;
    if (e.value) {
      row["value"] = *e.value;
    } else {
      row["value"] = nullptr;
    }
    arr.push_back(row);
  }
  j["entries"] = arr;
  return j.dump(2);
}

std::string WeatherReport::to_text() const
{
  std::ostringstream os;
  const int first = 20;
  const int col = 13;
  os << std::left << std::setw(first) << "class/metric";
  for (const auto & w : weathers) {
    os << std::right << std::setw(col) << w;
  }
  os << '\n';
  for (const auto & cls : row_classes()) {
    for (const char * metric : kMetrics) {
      bool any = false;
      for (const auto & e : entries) {
        any = any || (e.class_name == cls && e.metric == metric);
      }
      if (!any) {
        continue;
      }
      os << std::left << std::setw(first) << (cls + " " + metric);
      for (const auto & w : weathers) {
        const auto v = get(cls, w, metric);
        std::ostringstream cell;
        if (v) {
          cell << std::fixed << std::setprecision(2) << *v;
        } else {
          cell << "-";
        }
        os << std::right << std::setw(col) << cell.str();
      }
      os << '\n';
    }
  }
  return os.str();
}

WeatherReport weather_report(std::span<const FrameResult> frames, const EvalConfig & cfg)
{
  cfg.validate();
  WeatherReport report;
  for (const auto & f : frames) {
    if (std::find(report.weathers.begin(), report.weathers.end(), f.weather) ==
        report.weathers.end()) {
      report.weathers.push_back(f.weather);
    }
  }
  report.weathers.emplace_back("Total");

  for (const auto & weather : report.weathers) {
    std::vector<DetectionSet> dets;
    std::vector<DetectionSet> gts;
    for (const auto & f : frames) {
      if (weather == "Total" || f.weather == weather) {
        dets.push_back(f.detections);
        gts.push_back(f.ground_truth);
      }
    }
    for (int m = 0; m < 2; ++m) {
      const auto kind = m == 0 ? IouKind::bev : IouKind::box3d;
      for (int c = 0; c < kNumClasses; ++c) {
        std::optional<double> ap;
        if (!gts.empty()) {
          ap = ap_r40(dets, gts, c, cfg, kind);
        }
        report.entries.push_back({class_name(c), weather, kMetrics[m], ap});
      }
      std::optional<double> map;
      if (!gts.empty()) {
        map = mean_ap(dets, gts, cfg, kind);
      }
      report.entries.push_back({"mAP", weather, kMetrics[m], map});
    }
  }
  return report;
}

}  // namespace fusionlab::eval
