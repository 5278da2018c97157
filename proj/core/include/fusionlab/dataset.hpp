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

#ifndef FUSIONLAB__DATASET_HPP_
#define FUSIONLAB__DATASET_HPP_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "fusionlab/box.hpp"
#include "fusionlab/fogsim.hpp"
#include "fusionlab/pointcloud.hpp"
#include "fusionlab/scenegen.hpp"

// Frames on disk. A dataset directory holds lidar/<id>.pcl, radar/<id>.pcr and
// gt.jsonl. Box files (ground truth and detections) are JSON lines: a frame
// header {"frame": id, "weather": tag} followed by one object per box
// {"frame", "class", "x", "y", "z", "l", "w", "h", "yaw", "score"}.
namespace fusionlab::dataset
{

struct Frame
{
  std::string id;
  std::string weather{"normal"};
  pointcloud::LidarCloud lidar;
  pointcloud::RadarCloud radar;
  DetectionSet gt;
};

struct FrameBoxes
{
  std::string id;
  std::string weather{"normal"};
  DetectionSet boxes;
};

/// Zero-padded six-digit frame id.
std::string frame_id(std::size_t index);

void write_boxes_jsonl(const std::filesystem::path & path, std::span<const FrameBoxes> frames);
/// Frames in order of first appearance. Malformed lines raise FormatError
/// with the line number.
std::vector<FrameBoxes> read_boxes_jsonl(const std::filesystem::path & path);

void write_dataset(const std::filesystem::path & dir, std::span<const Frame> frames);
std::vector<Frame> read_dataset(const std::filesystem::path & dir);

/// Frames first_index .. first_index + count - 1, frame i generated from
/// derive_seed(seed, {i}); the spec's own seed is ignored.
std::vector<Frame> generate_frames(
  const scenegen::SceneSpec & spec, std::size_t count, std::uint64_t seed,
  std::size_t first_index = 0);

/// LiDAR of every frame passed through the fog simulator at `level`, frame i
/// seeded by derive_seed(seed, {level, i}); frames are re-tagged with the
/// level's weather tag. Level 0 leaves frames unchanged apart from the tag.
/// Scatter and threshold settings come from `base`; its alpha and seed are
/// replaced.
std::vector<Frame> with_fog(
  std::span<const Frame> frames, int level, std::uint64_t seed,
  const fogsim::FogParams & base = {});

}  // namespace fusionlab::dataset

#endif  // FUSIONLAB__DATASET_HPP_
