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

#include "fusionlab/box.hpp"

#include <charconv>
#include <cmath>

namespace fusionlab
{

const char * class_name(int class_id)
{
  switch (class_id) {
    case 0:
      return "car";
    case 1:
      return "pedestrian";
    case 2:
      return "cyclist";
    default:
      return "unknown";
  }
}

std::optional<int> class_from_name(const std::string & name)
{
  for (int c = 0; c < kNumClasses; ++c) {
    if (name == class_name(c)) {
      return c;
    }
  }
  int id = -1;
  auto [ptr, ec] = std::from_chars(name.data(), name.data() + name.size(), id);
  if (ec == std::errc() && ptr == name.data() + name.size() && id >= 0 && id < kNumClasses) {
    return id;
  }
  return std::nullopt;
}

double normalize_yaw(double yaw)
{
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double r = std::fmod(yaw, two_pi);
  if (r <= -std::numbers::pi) {
    r += two_pi;
  } else if (r > std::numbers::pi) {
    r -= two_pi;
  }
  return r;
}

std::array<Vec2, 4> bev_corners(const Box3D & box)
{
  const double c = std::cos(box.yaw);
  const double s = std::sin(box.yaw);
  const double hl = 0.5 * box.l;
  const double hw = 0.5 * box.w;
  const double local[4][2] = {{hl, hw}, {-hl, hw}, {-hl, -hw}, {hl, -hw}};
  std::array<Vec2, 4> out;
  for (int i = 0; i < 4; ++i) {
    out[i] = {box.cx + c * local[i][0] - s * local[i][1], box.cy + s * local[i][0] + c * local[i][1]};
  }
  return out;
}

bool point_in_box(const Box3D & box, double x, double y, double z, double margin)
{
  const double dx = x - box.cx;
  const double dy = y - box.cy;
  const double c = std::cos(box.yaw);
  const double s = std::sin(box.yaw);
  const double u = c * dx + s * dy;
  const double v = -s * dx + c * dy;
  return std::abs(u) <= 0.5 * box.l + margin && std::abs(v) <= 0.5 * box.w + margin &&
         std::abs(z - box.cz) <= 0.5 * box.h + margin;
}

double bev_area(const Box3D & box) { return box.l * box.w; }

}  // namespace fusionlab
