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

#ifndef FUSIONLAB__BOX_HPP_
#define FUSIONLAB__BOX_HPP_

#include <array>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

namespace fusionlab
{

/// Object classes of the synthetic world.
enum class ObjectClass : int { car = 0, pedestrian = 1, cyclist = 2 };

constexpr int kNumClasses = 3;

const char * class_name(int class_id);
/// Accepts "car", "pedestrian", "cyclist" or a decimal id.
std::optional<int> class_from_name(const std::string & name);

/// 7-DoF box: center, extents along heading (l), across (w) and vertical (h),
/// heading angle around +z. Score is only meaningful for predictions.
struct Box3D
{
  double cx{0.0};
  double cy{0.0};
  double cz{0.0};
  double l{1.0};
  double w{1.0};
  double h{1.0};
  double yaw{0.0};
  int class_id{0};
  double score{1.0};

  bool operator==(const Box3D &) const = default;
};

using DetectionSet = std::vector<Box3D>;

struct Vec2
{
  double x{0.0};
  double y{0.0};
};

/// Wraps an angle into (-pi, pi].
double normalize_yaw(double yaw);

/// Footprint corners, counter-clockwise.
std::array<Vec2, 4> bev_corners(const Box3D & box);

/// True when (x, y, z) lies inside `box` grown by `margin` on every side.
bool point_in_box(const Box3D & box, double x, double y, double z, double margin = 0.0);

double bev_area(const Box3D & box);

}  // namespace fusionlab

#endif  // FUSIONLAB__BOX_HPP_
