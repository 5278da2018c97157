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

#ifndef FUSIONLAB__SCENEGEN_HPP_
#define FUSIONLAB__SCENEGEN_HPP_

#include <array>
#include <cstdint>
#include <utility>

#include "fusionlab/box.hpp"
#include "fusionlab/pointcloud.hpp"

// Synthetic paired LiDAR/radar scenes with ground-truth boxes and per-point
// foreground labels: dense, clean LiDAR and sparse, noisy radar.
namespace fusionlab::scenegen
{

struct ClassModel
{
  std::pair<int, int> count{0, 0};  // objects per frame, inclusive range
  std::pair<double, double> length{1.0, 1.0};
  std::pair<double, double> width{1.0, 1.0};
  std::pair<double, double> height{1.0, 1.0};
  std::pair<double, double> speed{0.0, 0.0};  // [m/s], along the heading
  double rcs_mean{0.0};                       // [dBsm]
  double rcs_sigma{1.0};
  double radar_points{4.0};                   // mean radar returns per object
};

struct SceneSpec
{
  pointcloud::CloudBounds bounds{0.0, 25.6, -12.8, 12.8, -2.0, 2.0};
  std::array<ClassModel, kNumClasses> classes{
    ClassModel{{1, 3}, {3.6, 4.6}, {1.6, 2.0}, {1.4, 1.8}, {0.0, 10.0}, 10.0, 3.0, 8.0},
    ClassModel{{0, 2}, {0.6, 1.0}, {0.5, 0.9}, {1.5, 1.9}, {0.0, 1.5}, -5.0, 2.0, 3.0},
    ClassModel{{0, 2}, {1.6, 2.0}, {0.6, 0.9}, {1.5, 1.9}, {0.0, 5.0}, 0.0, 2.5, 4.0}};
  double ground_z{-1.8};
  double ground_sigma{0.02};
  double ground_density{2.0};     // LiDAR returns per m^2 of ground at the reference range
  double lidar_density{40.0};     // LiDAR returns per m^2 of visible object surface
  double reference_range{10.0};   // densities fall off as (reference / r)^2 beyond this
  double lidar_noise_sigma{0.02}; // [m]
  double radar_noise_rate{30.0};  // mean multipath noise returns per frame
  double radar_position_sigma{0.05};
  double noise_velocity_sigma{3.0};
  double noise_rcs_mean{-10.0};
  double noise_rcs_sigma{5.0};
  double ego_speed{5.0};          // [m/s] along +x
  double yaw_jitter{0.2};         // [rad] around the four axis headings
  double min_range{3.0};          // no object centers closer to the sensor
  double label_margin{0.2};       // box inflation within which radar returns count as foreground
  int max_placement_tries{200};
  std::uint64_t seed{0};

  void validate() const;
};

struct Scene
{
  pointcloud::LidarCloud lidar;
  pointcloud::RadarCloud radar;
  DetectionSet gt;
};

/// Deterministic in `spec.seed`. Throws Error when an object cannot be placed
/// without overlap after `max_placement_tries` attempts.
Scene generate_scene(const SceneSpec & spec);

}  // namespace fusionlab::scenegen

#endif  // FUSIONLAB__SCENEGEN_HPP_
