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

#include "fusionlab/pointcloud.hpp"

#include <cstring>
#include <fstream>
#include <iterator>

#include "binary_io.hpp"
#include "fusionlab/error.hpp"

namespace fusionlab::pointcloud
{

using detail::get_le;
using detail::write_le;

void CloudBounds::validate() const
{
  if (!(x_min < x_max)) {
    throw ConfigError("bounds.x", "x_min must be < x_max");
  }
  if (!(y_min < y_max)) {
    throw ConfigError("bounds.y", "y_min must be < y_max");
  }
  if (!(z_min < z_max)) {
    throw ConfigError("bounds.z", "z_min must be < z_max");
  }
}

template <typename Point>
std::vector<std::size_t> range_histogram(const std::vector<Point> & cloud, double bin_width)
{
  if (!(bin_width > 0.0)) {
    throw ConfigError("bin_width", "must be > 0");
  }
  std::vector<std::size_t> counts;
  for (const auto & p : cloud) {
    const auto bin = static_cast<std::size_t>(std::floor(range_of(p) / bin_width));
    if (bin >= counts.size()) {
      counts.resize(bin + 1, 0);
    }
    ++counts[bin];
  }
  return counts;
}

template std::vector<std::size_t> range_histogram(const LidarCloud &, double);
template std::vector<std::size_t> range_histogram(const RadarCloud &, double);

std::vector<std::optional<bool>> labels_of(const LidarCloud & cloud)
{
  std::vector<std::optional<bool>> out;
  out.reserve(cloud.size());
  for (const auto & p : cloud) {
    out.push_back(p.fg);
  }
  return out;
}

std::vector<std::optional<bool>> labels_of(const RadarCloud & cloud)
{
  std::vector<std::optional<bool>> out;
  out.reserve(cloud.size());
  for (const auto & p : cloud) {
    out.push_back(p.fg);
  }
  return out;
}

namespace
{

std::uint8_t encode_label(const std::optional<bool> & fg)
{
  return fg.has_value() ? static_cast<std::uint8_t>(*fg ? 1 : 0) : std::uint8_t{255};
}

std::ofstream open_for_write(const std::filesystem::path & path)
{
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) {
    throw Error("cannot open for writing: " + path.string());
  }
  return os;
}

void write_header(std::ostream & os, const char (&magic)[7], std::size_t count)
{
  os.write(magic, 7);
  write_le<std::uint32_t>(os, kFormatVersion);
  write_le<std::uint64_t>(os, count);
}

std::vector<unsigned char> slurp(const std::filesystem::path & path)
{
  std::ifstream is(path, std::ios::binary);
  if (!is) {
    throw Error("cannot open point cloud: " + path.string());
  }
  return std::vector<unsigned char>(
    std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>());
}

/// Validates magic/version/length and returns the declared point count.
std::size_t check_header(
  const std::filesystem::path & path, const std::vector<unsigned char> & bytes,
  const char (&expected)[7], const char (&other)[7], std::size_t record_bytes)
{
  if (bytes.size() < kHeaderBytes) {
    throw FormatError(
      path.string() + ": file is " + std::to_string(bytes.size()) +
      " bytes, shorter than the header");
  }
  if (std::memcmp(bytes.data(), expected, 7) != 0) {
    if (std::memcmp(bytes.data(), other, 7) == 0) {
      throw FormatError(path.string() + ": wrong modality (magic " + std::string(other, 7) +
                        ", expected " + std::string(expected, 7) + ")");
    }
    throw FormatError(path.string() + ": bad magic");
  }
  const auto version = get_le<std::uint32_t>(bytes.data() + 7);
  if (version != kFormatVersion) {
    throw FormatError(path.string() + ": unsupported version " + std::to_string(version));
  }
  const auto count = static_cast<std::size_t>(get_le<std::uint64_t>(bytes.data() + 11));
  const std::size_t payload = bytes.size() - kHeaderBytes;
  const std::size_t actual = payload / record_bytes;
  if (payload != count * record_bytes) {
    throw FormatError(
      path.string() + ": expected " + std::to_string(count) + " records, found " +
      std::to_string(actual) + (payload % record_bytes ? " (plus a partial record)" : ""));
  }
  return count;
}

std::optional<bool> decode_label(
  const std::filesystem::path & path, unsigned char byte, std::size_t offset)
{
  switch (byte) {
    case 0:
      return false;
    case 1:
      return true;
    case 255:
      return std::nullopt;
    default:
      throw FormatError(
        path.string() + ": malformed record at byte " + std::to_string(offset) +
        ": label byte " + std::to_string(byte));
  }
}

void require_finite(const std::filesystem::path & path, double v, std::size_t offset)
{
  if (!std::isfinite(v)) {
    throw FormatError(
      path.string() + ": malformed record at byte " + std::to_string(offset) +
      ": non-finite value");
  }
}

}  // namespace

void save_cloud(const std::filesystem::path & path, const LidarCloud & cloud)
{
  auto os = open_for_write(path);
  write_header(os, kLidarMagic, cloud.size());
  for (const auto & p : cloud) {
    write_le(os, p.x);
    write_le(os, p.y);
    write_le(os, p.z);
    write_le(os, p.reflectance);
    write_le(os, encode_label(p.fg));
  }
  if (!os) {
    throw Error("failed writing " + path.string());
  }
}

void save_cloud(const std::filesystem::path & path, const RadarCloud & cloud)
{
  auto os = open_for_write(path);
  write_header(os, kRadarMagic, cloud.size());
  for (const auto & p : cloud) {
    write_le(os, p.x);
    write_le(os, p.y);
    write_le(os, p.z);
    write_le(os, p.v_r);
    write_le(os, p.v_a);
    write_le(os, p.rcs);
    write_le(os, encode_label(p.fg));
  }
  if (!os) {
    throw Error("failed writing " + path.string());
  }
}

LidarCloud load_lidar(const std::filesystem::path & path)
{
  const auto bytes = slurp(path);
  const auto count = check_header(path, bytes, kLidarMagic, kRadarMagic, kLidarRecordBytes);
  LidarCloud cloud(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t offset = kHeaderBytes + i * kLidarRecordBytes;
    const unsigned char * r = bytes.data() + offset;
    auto & p = cloud[i];
    p.x = get_le<double>(r);
    p.y = get_le<double>(r + 8);
    p.z = get_le<double>(r + 16);
    p.reflectance = get_le<double>(r + 24);
    for (double v : {p.x, p.y, p.z, p.reflectance}) {
      require_finite(path, v, offset);
    }
    p.fg = decode_label(path, r[32], offset);
  }
  return cloud;
}

RadarCloud load_radar(const std::filesystem::path & path)
{
  const auto bytes = slurp(path);
  const auto count = check_header(path, bytes, kRadarMagic, kLidarMagic, kRadarRecordBytes);
  RadarCloud cloud(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t offset = kHeaderBytes + i * kRadarRecordBytes;
    const unsigned char * r = bytes.data() + offset;
    auto & p = cloud[i];
    p.x = get_le<double>(r);
    p.y = get_le<double>(r + 8);
    p.z = get_le<double>(r + 16);
    p.v_r = get_le<double>(r + 24);
    p.v_a = get_le<double>(r + 32);
    p.rcs = get_le<double>(r + 40);
    for (double v : {p.x, p.y, p.z, p.v_r, p.v_a, p.rcs}) {
      require_finite(path, v, offset);
    }
    p.fg = decode_label(path, r[48], offset);
  }
  return cloud;
}

AnyCloud load_cloud(const std::filesystem::path & path, Modality modality)
{
  if (modality == Modality::lidar) {
    return load_lidar(path);
  }
  return load_radar(path);
}

namespace
{
const char * label_text(const std::optional<bool> & fg)
{
  return fg.has_value() ? (*fg ? "1" : "0") : "";
}
}  // namespace

void export_csv(const std::filesystem::path & path, const LidarCloud & cloud)
{
  std::ofstream os(path);
  if (!os) {
    throw Error("cannot open for writing: " + path.string());
  }
  os.precision(6);
  os << "x,y,z,reflectance,fg\n";
  for (const auto & p : cloud) {
    os << p.x << ',' << p.y << ',' << p.z << ',' << p.reflectance << ',' << label_text(p.fg)
       << '\n';
  }
}

void export_csv(const std::filesystem::path & path, const RadarCloud & cloud)
{
  std::ofstream os(path);
  if (!os) {
    throw Error("cannot open for writing: " + path.string());
  }
  os.precision(6);
  os << "x,y,z,v_r,v_a,rcs,fg\n";
  for (const auto & p : cloud) {
    os << p.x << ',' << p.y << ',' << p.z << ',' << p.v_r << ',' << p.v_a << ',' << p.rcs << ','
       << label_text(p.fg) << '\n';
  }
}

}  // namespace fusionlab::pointcloud
