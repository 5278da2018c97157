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

#include "fusionlab/dataset.hpp"

#include <cstdio>
#include <fstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "fusionlab/error.hpp"
#include "fusionlab/eval.hpp"
#include "fusionlab/fogsim.hpp"
#include "fusionlab/random.hpp"

namespace fusionlab::dataset
{

namespace fs = std::filesystem;
using nlohmann::ordered_json;

std::string frame_id(std::size_t index)
{
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%06zu", index);
  return buf;
}

void write_boxes_jsonl(const fs::path & path, std::span<const FrameBoxes> frames)
{
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw Error("cannot open '" + path.string() + "' for writing");
  }
  for (const auto & f : frames) {
    ordered_json header;
    header["frame"] = f.id;
    header["weather"] = f.weather;
    out << header.dump() << '\n';
    for (const auto & b : f.boxes) {
      ordered_json j;
      j["frame"] = f.id;
      j["class"] = class_name(b.class_id);
      j["x"] = b.cx;
      j["y"] = b.cy;
      j["z"] = b.cz;
      j["l"] = b.l;
      j["w"] = b.w;
      j["h"] = b.h;
      j["yaw"] = b.yaw;
      j["score"] = b.score;
      out << j.dump() << '\n';
    }
  }
  if (!out) {
    throw Error("failed writing '" + path.string() + "'");
  }
}

std::vector<FrameBoxes> read_boxes_jsonl(const fs::path & path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error("cannot open '" + path.string() + "'");
  }
  std::vector<FrameBoxes> frames;
  std::unordered_map<std::string, std::size_t> slot;
  auto frame_for = [&](const std::string & id) -> FrameBoxes & {
    auto it = slot.find(id);
    if (it == slot.end()) {
      it = slot.emplace(id, frames.size()).first;
      frames.push_back({id, "normal", {}});
    }
    return frames[it->second];
  };
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) {
      continue;
    }
    const auto where = path.string() + ":" + std::to_string(line_no) + ": ";
    ordered_json j;
    try {
      j = ordered_json::parse(line);
    } catch (const nlohmann::json::exception & e) {
      throw FormatError(where + "invalid JSON (" + e.what() + ")");
    }
    try {
      const std::string id = j.at("frame").get<std::string>();
      FrameBoxes & f = frame_for(id);
      if (!j.contains("x")) {
        if (j.contains("weather")) {
          f.weather = j.at("weather").get<std::string>();
        }
        continue;
      }
      Box3D b;
      const auto cls = class_from_name(j.at("class").get<std::string>());
      if (!cls) {
        throw FormatError(where + "unknown class '" + j.at("class").get<std::string>() + "'");
      }
      b.class_id = *cls;
      b.cx = j.at("x").get<double>();
      b.cy = j.at("y").get<double>();
      b.cz = j.at("z").get<double>();
      b.l = j.at("l").get<double>();
      b.w = j.at("w").get<double>();
      b.h = j.at("h").get<double>();
      b.yaw = j.at("yaw").get<double>();
      b.score = j.value("score", 1.0);
      f.boxes.push_back(b);
    } catch (const nlohmann::json::exception & e) {
      throw FormatError(where + "bad box record (" + e.what() + ")");
    }
  }
  return frames;
}

void write_dataset(const fs::path & dir, std::span<const Frame> frames)
{
  fs::create_directories(dir / "lidar");
  fs::create_directories(dir / "radar");
  std::vector<FrameBoxes> boxes;
  boxes.reserve(frames.size());
  for (const auto & f : frames) {
    pointcloud::save_cloud(dir / "lidar" / (f.id + ".pcl"), f.lidar);
    pointcloud::save_cloud(dir / "radar" / (f.id + ".pcr"), f.radar);
    boxes.push_back({f.id, f.weather, f.gt});
  }
  write_boxes_jsonl(dir / "gt.jsonl", boxes);
}

std::vector<Frame> read_dataset(const fs::path & dir)
{
  const fs::path index = dir / "gt.jsonl";
  if (!fs::exists(index)) {
    throw Error("'" + dir.string() + "' is not a dataset directory (missing gt.jsonl)");
  }
  std::vector<Frame> out;
  for (auto & fb : read_boxes_jsonl(index)) {
    Frame f;
    f.id = fb.id;
    f.weather = fb.weather;
    f.gt = std::move(fb.boxes);
    f.lidar = pointcloud::load_lidar(dir / "lidar" / (f.id + ".pcl"));
    f.radar = pointcloud::load_radar(dir / "radar" / (f.id + ".pcr"));
    out.push_back(std::move(f));
  }
  return out;
}

std::vector<Frame> generate_frames(
  const scenegen::SceneSpec & spec, std::size_t count, std::uint64_t seed, std::size_t first_index)
{
  std::vector<Frame> out;
  out.reserve(count);
  for (std::size_t i = first_index; i < first_index + count; ++i) {
    scenegen::SceneSpec s = spec;
    s.seed = derive_seed(seed, {i});
    auto scene = scenegen::generate_scene(s);
    Frame f;
    f.id = frame_id(i);
    f.lidar = std::move(scene.lidar);
    f.radar = std::move(scene.radar);
    f.gt = std::move(scene.gt);
    out.push_back(std::move(f));
  }
  return out;
}

std::vector<Frame> with_fog(
  std::span<const Frame> frames, int level, std::uint64_t seed, const fogsim::FogParams & base)
{
  const double alpha = fogsim::fog_level_params(level, 0).alpha;
  std::vector<Frame> out;
  out.reserve(frames.size());
  for (std::size_t i = 0; i < frames.size(); ++i) {
    Frame f = frames[i];
    auto params = base;
    params.alpha = alpha;
    params.seed = derive_seed(seed, {static_cast<std::uint64_t>(level), i});
    f.lidar = fogsim::simulate_fog(f.lidar, params);
    f.weather = eval::weather_tag(level);
    out.push_back(std::move(f));
  }
  return out;
}

}  // namespace fusionlab::dataset
