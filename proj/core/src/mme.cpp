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

#include "fusionlab/mme.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "fusionlab/error.hpp"
#include "fusionlab/ops.hpp"

namespace fusionlab::mme
{

namespace ts = fusionlab::tensor;

void PillarGridSpec::validate() const
{
  bounds.validate();
  if (!(cell_x > 0.0)) {
    throw ConfigError("mme.cell_x", "must be > 0");
  }
  if (!(cell_y > 0.0)) {
    throw ConfigError("mme.cell_y", "must be > 0");
  }
  if (max_points_per_pillar == 0) {
    throw ConfigError("mme.max_points_per_pillar", "must be >= 1");
  }
  if (max_pillars == 0) {
    throw ConfigError("mme.max_pillars", "must be >= 1");
  }
}

std::size_t PillarGridSpec::rows() const
{
  return static_cast<std::size_t>(std::ceil((bounds.y_max - bounds.y_min) / cell_y - 1e-9));
}

std::size_t PillarGridSpec::cols() const
{
  return static_cast<std::size_t>(std::ceil((bounds.x_max - bounds.x_min) / cell_x - 1e-9));
}

namespace
{

struct Builder
{
  std::size_t row;
  std::size_t col;
  std::vector<std::array<double, 4>> lidar;  // x, y, z, reflectance
  std::vector<std::array<double, 6>> radar;  // x, y, z, v_r, v_a, rcs
};

template <std::size_t N>
std::array<double, 3> mean_xyz(const std::vector<std::array<double, N>> & pts)
{
  std::array<double, 3> m{};
  if (pts.empty()) {
    return m;
  }
  for (const auto & p : pts) {
    m[0] += p[0];
    m[1] += p[1];
    m[2] += p[2];
  }
  const double n = static_cast<double>(pts.size());
  return {m[0] / n, m[1] / n, m[2] / n};
}

}  // namespace

std::vector<EncodedPillar> pillarize(
  const pointcloud::LidarCloud & lidar, const pointcloud::RadarCloud & radar,
  const PillarGridSpec & spec)
{
  spec.validate();
  const std::size_t n_rows = spec.rows();
  const std::size_t n_cols = spec.cols();
  const auto & b = spec.bounds;

  std::map<std::size_t, std::size_t> slot_of_cell;
  std::vector<Builder> builders;

  auto slot = [&](double x, double y, double z) -> Builder * {
    if (!b.contains(x, y, z)) {
      return nullptr;
    }
    const auto r = static_cast<std::size_t>(std::floor((y - b.y_min) / spec.cell_y));
    const auto c = static_cast<std::size_t>(std::floor((x - b.x_min) / spec.cell_x));
    if (r >= n_rows || c >= n_cols) {
      return nullptr;
    }
    const std::size_t cell = r * n_cols + c;
    auto it = slot_of_cell.find(cell);
    if (it == slot_of_cell.end()) {
      if (builders.size() >= spec.max_pillars) {
        return nullptr;
      }
      it = slot_of_cell.emplace(cell, builders.size()).first;
      builders.push_back({r, c, {}, {}});
    }
    return &builders[it->second];
  };

  for (const auto & p : lidar) {
    if (auto * bl = slot(p.x, p.y, p.z); bl && bl->lidar.size() < spec.max_points_per_pillar) {
      bl->lidar.push_back({p.x, p.y, p.z, p.reflectance});
    }
  }
  for (const auto & p : radar) {
    if (auto * bl = slot(p.x, p.y, p.z); bl && bl->radar.size() < spec.max_points_per_pillar) {
      bl->radar.push_back({p.x, p.y, p.z, p.v_r, p.v_a, p.rcs});
    }
  }

  std::vector<EncodedPillar> out;
  out.reserve(builders.size());
  for (const auto & [cell, idx] : slot_of_cell) {
    const Builder & bl = builders[idx];
    EncodedPillar pillar;
    pillar.row = bl.row;
    pillar.col = bl.col;
    const double cx = b.x_min + (static_cast<double>(bl.col) + 0.5) * spec.cell_x;
    const double cy = b.y_min + (static_cast<double>(bl.row) + 0.5) * spec.cell_y;

    pillar.lidar_mean = mean_xyz(bl.lidar);
    for (const auto & p : bl.lidar) {
      pillar.lidar_reflectance_mean += p[3];
      pillar.lidar_rows.push_back(
        {p[0], p[1], p[2], p[0] - pillar.lidar_mean[0], p[1] - pillar.lidar_mean[1],
         p[2] - pillar.lidar_mean[2], p[0] - cx, p[1] - cy, p[3]});
    }
    if (!bl.lidar.empty()) {
      pillar.lidar_reflectance_mean /= static_cast<double>(bl.lidar.size());
    }

    pillar.radar_mean = mean_xyz(bl.radar);
    for (const auto & p : bl.radar) {
      pillar.radar_velocity_mean[0] += p[3];
      pillar.radar_velocity_mean[1] += p[4];
      pillar.radar_rcs_mean += p[5];
      pillar.radar_rows.push_back(
        {p[0], p[1], p[2], p[0] - pillar.radar_mean[0], p[1] - pillar.radar_mean[1],
         p[2] - pillar.radar_mean[2], p[0] - cx, p[1] - cy, p[3], p[4], p[5]});
    }
    if (!bl.radar.empty()) {
      const double n = static_cast<double>(bl.radar.size());
      pillar.radar_velocity_mean[0] /= n;
      pillar.radar_velocity_mean[1] /= n;
      pillar.radar_rcs_mean /= n;
    }
    out.push_back(std::move(pillar));
  }
  return out;
}

namespace
{

Row widen_lidar(const Row & raw)
{
  Row row(kFusedWidth, 0.0);
  std::copy(raw.begin(), raw.begin() + 6, row.begin());  // coords + own mean offset
  row[col::center] = raw[6];
  row[col::center + 1] = raw[7];
  row[col::reflectance] = raw[8];
  return row;
}

Row widen_radar(const Row & raw)
{
  Row row(kFusedWidth, 0.0);
  std::copy(raw.begin(), raw.begin() + 3, row.begin());
  std::copy(raw.begin() + 3, raw.begin() + 6, row.begin() + col::radar_offset);
  row[col::center] = raw[6];
  row[col::center + 1] = raw[7];
  row[col::velocity] = raw[8];
  row[col::velocity + 1] = raw[9];
  row[col::rcs] = raw[10];
  return row;
}

EncodedPillar widen(const EncodedPillar & p)
{
  EncodedPillar out = p;
  out.fused = false;
  out.lidar_rows.clear();
  out.radar_rows.clear();
  for (const auto & r : p.lidar_rows) {
    if (r.size() != kLidarRawWidth) {
      throw ShapeError("pillar LiDAR row has width " + std::to_string(r.size()) + ", expected 9");
    }
    out.lidar_rows.push_back(widen_lidar(r));
  }
  for (const auto & r : p.radar_rows) {
    if (r.size() != kRadarRawWidth) {
      throw ShapeError("pillar radar row has width " + std::to_string(r.size()) + ", expected 11");
    }
    out.radar_rows.push_back(widen_radar(r));
  }
  return out;
}

}  // namespace

std::vector<EncodedPillar> widen_unfused(const std::vector<EncodedPillar> & pillars)
{
  std::vector<EncodedPillar> out;
  out.reserve(pillars.size());
  for (const auto & p : pillars) {
    out.push_back(widen(p));
  }
  return out;
}

std::vector<EncodedPillar> bidirectional_fuse(const std::vector<EncodedPillar> & pillars)
{
  std::vector<EncodedPillar> out;
  out.reserve(pillars.size());
  for (const auto & p : pillars) {
    EncodedPillar w = widen(p);
    if (!p.lidar_rows.empty() && !p.radar_rows.empty()) {
      w.fused = true;
      for (auto & row : w.lidar_rows) {
        for (std::size_t k = 0; k < 3; ++k) {
          row[col::radar_offset + k] = row[col::x + k] - p.radar_mean[k];
        }
        row[col::velocity] = p.radar_velocity_mean[0];
        row[col::velocity + 1] = p.radar_velocity_mean[1];
        row[col::rcs] = p.radar_rcs_mean;
        row[col::presence] = 1.0;
      }
      for (auto & row : w.radar_rows) {
        for (std::size_t k = 0; k < 3; ++k) {
          row[col::lidar_offset + k] = row[col::x + k] - p.lidar_mean[k];
        }
        row[col::reflectance] = p.lidar_reflectance_mean;
        row[col::presence] = 1.0;
      }
    }
    out.push_back(std::move(w));
  }
  return out;
}

std::array<double, kFusedWidth> default_feature_scale()
{
  std::array<double, kFusedWidth> s{};
  s[col::x] = 1.0 / 25.0;
  s[col::x + 1] = 1.0 / 25.0;
  s[col::x + 2] = 1.0 / 2.0;
  for (std::size_t k = 0; k < 3; ++k) {
    s[col::lidar_offset + k] = 1.0 / 0.2;
    s[col::radar_offset + k] = 1.0 / 0.2;
  }
  s[col::center] = 1.0 / 0.2;
  s[col::center + 1] = 1.0 / 0.2;
  s[col::reflectance] = 1.0;
  s[col::velocity] = 1.0 / 10.0;
  s[col::velocity + 1] = 1.0 / 10.0;
  s[col::rcs] = 1.0 / 10.0;
  s[col::presence] = 1.0;
  return s;
}

PillarEncoder::PillarEncoder(std::size_t channels, std::mt19937_64 & rng)
: linear(kFusedWidth, channels, rng)
{
}

void PillarEncoder::collect(const std::string & prefix, nn::StateList & out) const
{
  linear.collect(prefix, out);
}

namespace
{

Tensor encode_modality(
  Tape & tape, const std::vector<EncodedPillar> & pillars, bool lidar,
  const PillarEncoder & encoder, std::size_t height, std::size_t width,
  std::vector<std::uint8_t> & occupancy)
{
  std::vector<double> values;
  std::vector<std::size_t> offsets{0};
  std::vector<std::size_t> cells;
  for (const auto & p : pillars) {
    const auto & rows = lidar ? p.lidar_rows : p.radar_rows;
    if (rows.empty()) {
      continue;
    }
    for (const auto & r : rows) {
      if (r.size() != kFusedWidth) {
        throw ShapeError(
          "pillar encoder expects rows of width " + std::to_string(kFusedWidth) + ", got " +
          std::to_string(r.size()));
      }
      for (std::size_t k = 0; k < kFusedWidth; ++k) {
        values.push_back(r[k] * encoder.feature_scale[k]);
      }
    }
    offsets.push_back(offsets.back() + rows.size());
    const std::size_t cell = p.row * width + p.col;
    cells.push_back(cell);
    occupancy[cell] = 1;
  }
  const std::size_t channels = encoder.channels();
  if (cells.empty()) {
    return Tensor::zeros({channels, height, width});
  }
  const Tensor x = Tensor::from({offsets.back(), kFusedWidth}, std::move(values));
  const Tensor h = ts::relu(tape, encoder.linear.forward(tape, x));
  const Tensor pooled = ts::segment_max(tape, h, offsets);
  return ts::scatter_rows_to_grid(tape, pooled, cells, height, width);
}

}  // namespace

BevPair pillars_to_bev(
  Tape & tape, const std::vector<EncodedPillar> & pillars, const PillarEncoder & lidar_encoder,
  const PillarEncoder & radar_encoder, const PillarGridSpec & spec)
{
  if (lidar_encoder.channels() != radar_encoder.channels()) {
    throw ShapeError(
      "LiDAR encoder has " + std::to_string(lidar_encoder.channels()) +
      " channels, radar encoder " + std::to_string(radar_encoder.channels()));
  }
  const std::size_t height = spec.rows();
  const std::size_t width = spec.cols();
  BevPair out;
  out.lidar_occupancy.assign(height * width, 0);
  out.radar_occupancy.assign(height * width, 0);
  out.f_l = encode_modality(tape, pillars, true, lidar_encoder, height, width, out.lidar_occupancy);
  out.f_r = encode_modality(tape, pillars, false, radar_encoder, height, width, out.radar_occupancy);
  return out;
}

}  // namespace fusionlab::mme
