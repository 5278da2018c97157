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

#ifndef FUSIONLAB__MME_HPP_
#define FUSIONLAB__MME_HPP_

#include <array>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "fusionlab/nn.hpp"
#include "fusionlab/pointcloud.hpp"

// Multi-modal encoder: pillarization of both clouds on a shared grid,
// bidirectional cross-modal feature exchange, and the per-modality pillar
// encoder that produces BEV feature maps.
namespace fusionlab::mme
{

using tensor::Tape;
using tensor::Tensor;

struct PillarGridSpec
{
  pointcloud::CloudBounds bounds{};
  double cell_x{0.4};
  double cell_y{0.4};
  std::size_t max_points_per_pillar{32};
  std::size_t max_pillars{12000};

  void validate() const;
  /// ceil((y_max - y_min) / cell_y).
  std::size_t rows() const;
  /// ceil((x_max - x_min) / cell_x).
  std::size_t cols() const;
};

/// Pre-fusion row widths.
constexpr std::size_t kLidarRawWidth = 9;   // x, y, z, mean offset (3), center offset (2), reflectance
constexpr std::size_t kRadarRawWidth = 11;  // x, y, z, mean offset (3), center offset (2), v_r, v_a, rcs

/// Post-fusion row layout shared by both modalities.
namespace col
{
constexpr std::size_t x = 0;            // 3 coordinates
constexpr std::size_t lidar_offset = 3; // 3: offset to the LiDAR pillar mean
constexpr std::size_t radar_offset = 6; // 3: offset to the radar pillar mean
constexpr std::size_t center = 9;       // 2: offset to the cell center
constexpr std::size_t reflectance = 11;
constexpr std::size_t velocity = 12;    // 2: v_r, v_a
constexpr std::size_t rcs = 14;
constexpr std::size_t presence = 15;    // 1 when the cell holds both modalities
}  // namespace col
constexpr std::size_t kFusedWidth = 16;

using Row = std::vector<double>;

struct EncodedPillar
{
  std::size_t row{0};
  std::size_t col{0};
  std::vector<Row> lidar_rows;
  std::vector<Row> radar_rows;
  bool fused{false};

  // Own-modality pillar means, kept for the cross-modal exchange.
  std::array<double, 3> lidar_mean{};
  std::array<double, 3> radar_mean{};
  double lidar_reflectance_mean{0.0};
  std::array<double, 2> radar_velocity_mean{};
  double radar_rcs_mean{0.0};
};

/// Groups points into cells (row = floor((y - y_min) / cell_y), col likewise
/// in x) and builds pre-fusion rows. Points outside the bounds are ignored.
/// Pillars are created in arrival order, LiDAR first; points beyond
/// max_points_per_pillar and pillars beyond max_pillars are dropped. Output is
/// sorted by (row, col).
std::vector<EncodedPillar> pillarize(
  const pointcloud::LidarCloud & lidar, const pointcloud::RadarCloud & radar,
  const PillarGridSpec & spec);

/// Widens rows to the fused layout. In cells holding both modalities every
/// LiDAR row gains its offset to the radar mean and the radar mean velocity
/// and RCS; every radar row gains its offset to the LiDAR mean and the mean
/// LiDAR reflectance; the presence flag is 1. Single-modality cells get zero
/// cross-modal entries and presence 0.
std::vector<EncodedPillar> bidirectional_fuse(const std::vector<EncodedPillar> & pillars);

/// Widens rows to the fused layout without any exchange (all cross-modal
/// entries and the presence flag zero); the encoder without cross-modal fusion.
std::vector<EncodedPillar> widen_unfused(const std::vector<EncodedPillar> & pillars);

/// Fixed per-column input scaling used by the pillar encoder by default.
std::array<double, kFusedWidth> default_feature_scale();

/// Linear + ReLU on every row followed by a max over each pillar's rows.
class PillarEncoder
{
public:
  PillarEncoder() = default;
  PillarEncoder(std::size_t channels, std::mt19937_64 & rng);

  /// S x kFusedWidth rows -> per-pillar S' x C features.
  nn::Linear linear;
  /// Rows are multiplied column-wise by this scale before the linear map.
  std::array<double, kFusedWidth> feature_scale = default_feature_scale();

  std::size_t channels() const { return linear.out_features(); }
  void collect(const std::string & prefix, nn::StateList & out) const;
};

struct BevPair
{
  Tensor f_l;  // C x H x W
  Tensor f_r;  // C x H x W
  std::vector<std::uint8_t> lidar_occupancy;  // H x W
  std::vector<std::uint8_t> radar_occupancy;  // H x W
};

/// Encodes each modality's rows and scatters the pooled features to their
/// cells; cells without points of a modality are exactly zero in its map.
BevPair pillars_to_bev(
  Tape & tape, const std::vector<EncodedPillar> & pillars, const PillarEncoder & lidar_encoder,
  const PillarEncoder & radar_encoder, const PillarGridSpec & spec);

}  // namespace fusionlab::mme

#endif  // FUSIONLAB__MME_HPP_
