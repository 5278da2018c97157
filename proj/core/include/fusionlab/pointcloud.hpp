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

#ifndef FUSIONLAB__POINTCLOUD_HPP_
#define FUSIONLAB__POINTCLOUD_HPP_

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace fusionlab::pointcloud
{

struct LidarPoint
{
  double x{0.0};
  double y{0.0};
  double z{0.0};
  double reflectance{0.0};  // unitless, [0, 1]
  std::optional<bool> fg;   // synthetic ground truth, when known

  bool operator==(const LidarPoint &) const = default;
};

struct RadarPoint
{
  double x{0.0};
  double y{0.0};
  double z{0.0};
  double v_r{0.0};  // relative radial velocity [m/s]
  double v_a{0.0};  // absolute (ego-compensated) radial velocity [m/s]
  double rcs{0.0};  // radar cross-section [dBsm]
  std::optional<bool> fg;

  bool operator==(const RadarPoint &) const = default;
};

using LidarCloud = std::vector<LidarPoint>;
using RadarCloud = std::vector<RadarPoint>;

enum class Modality { lidar, radar };

/// Axis-aligned crop box, half-open on every axis.
struct CloudBounds
{
  double x_min{0.0};
  double x_max{72.0};
  double y_min{-16.0};
  double y_max{16.0};
  double z_min{-2.0};
  double z_max{7.6};

  /// Throws ConfigError when min >= max on any axis.
  void validate() const;

  bool contains(double x, double y, double z) const
  {
    return x >= x_min && x < x_max && y >= y_min && y < y_max && z >= z_min && z < z_max;
  }

  bool operator==(const CloudBounds &) const = default;
};

template <typename Point>
double range_of(const Point & p)
{
  return std::sqrt(p.x * p.x + p.y * p.y + p.z * p.z);
}

/// Points inside `bounds`, order preserved.
template <typename Point>
std::vector<Point> crop(const std::vector<Point> & cloud, const CloudBounds & bounds)
{
  bounds.validate();
  std::vector<Point> out;
  out.reserve(cloud.size());
  for (const auto & p : cloud) {
    if (bounds.contains(p.x, p.y, p.z)) {
      out.push_back(p);
    }
  }
  return out;
}

/// Point counts per range bin [k * bin_width, (k+1) * bin_width); the result
/// is as long as the farthest occupied bin.
template <typename Point>
std::vector<std::size_t> range_histogram(const std::vector<Point> & cloud, double bin_width);

std::vector<std::optional<bool>> labels_of(const LidarCloud & cloud);
std::vector<std::optional<bool>> labels_of(const RadarCloud & cloud);

// Binary interchange format: 7-byte magic ("L4DRPCL" or "L4DRPCR"), u32
// version, u64 point count, then fixed-width little-endian records. LiDAR
// records are x, y, z, reflectance (f64) plus a u8 label; radar records are
// x, y, z, v_r, v_a, rcs (f64) plus a u8 label. Label byte: 0 background,
// 1 foreground, 255 absent.
constexpr char kLidarMagic[7] = {'L', '4', 'D', 'R', 'P', 'C', 'L'};
constexpr char kRadarMagic[7] = {'L', '4', 'D', 'R', 'P', 'C', 'R'};
constexpr std::uint32_t kFormatVersion = 1;
constexpr std::size_t kLidarRecordBytes = 4 * 8 + 1;
constexpr std::size_t kRadarRecordBytes = 6 * 8 + 1;
constexpr std::size_t kHeaderBytes = 7 + 4 + 8;

void save_cloud(const std::filesystem::path & path, const LidarCloud & cloud);
void save_cloud(const std::filesystem::path & path, const RadarCloud & cloud);

using AnyCloud = std::variant<LidarCloud, RadarCloud>;

/// Reads a cloud file, checking that its magic matches `modality`.
AnyCloud load_cloud(const std::filesystem::path & path, Modality modality);
LidarCloud load_lidar(const std::filesystem::path & path);
RadarCloud load_radar(const std::filesystem::path & path);

/// Human-readable export, lossy (6 significant digits). Columns are
/// x,y,z,reflectance,fg for LiDAR and x,y,z,v_r,v_a,rcs,fg for radar.
void export_csv(const std::filesystem::path & path, const LidarCloud & cloud);
void export_csv(const std::filesystem::path & path, const RadarCloud & cloud);

}  // namespace fusionlab::pointcloud

#endif  // FUSIONLAB__POINTCLOUD_HPP_
