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

#include "fusionlab/scenegen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "fusionlab/error.hpp"

namespace fusionlab::scenegen
{

void SceneSpec::validate() const
{
  bounds.validate();
  for (int c = 0; c < kNumClasses; ++c) {
    const auto & m = classes[static_cast<std::size_t>(c)];
    const std::string prefix = std::string("scene.") + class_name(c) + ".";
    if (m.count.first < 0 || m.count.second < m.count.first) {
      throw ConfigError(prefix + "count", "need 0 <= min <= max");
    }
    for (const auto & [name, range] :
         {std::pair{"length", m.length}, std::pair{"width", m.width}, std::pair{"height", m.height}})
    {
      if (!(range.first > 0.0 && range.second >= range.first)) {
        throw ConfigError(prefix + name, "need 0 < min <= max");
      }
    }
    if (!(m.speed.first >= 0.0 && m.speed.second >= m.speed.first)) {
      throw ConfigError(prefix + "speed", "need 0 <= min <= max");
    }
    if (!(m.rcs_sigma >= 0.0)) {
      throw ConfigError(prefix + "rcs_sigma", "must be >= 0");
    }
    if (!(m.radar_points >= 0.0)) {
      throw ConfigError(prefix + "radar_points", "must be >= 0");
    }
  }
  const std::pair<const char *, double> non_negative[] = {
    {"scene.ground_sigma", ground_sigma},
    {"scene.ground_density", ground_density},
    {"scene.lidar_density", lidar_density},
    {"scene.lidar_noise_sigma", lidar_noise_sigma},
    {"scene.radar_noise_rate", radar_noise_rate},
    {"scene.radar_position_sigma", radar_position_sigma},
    {"scene.noise_velocity_sigma", noise_velocity_sigma},
    {"scene.noise_rcs_sigma", noise_rcs_sigma},
    {"scene.yaw_jitter", yaw_jitter},
    {"scene.min_range", min_range},
    {"scene.label_margin", label_margin}};
  for (const auto & [field, value] : non_negative) {
    if (!(value >= 0.0) || !std::isfinite(value)) {
      throw ConfigError(field, "must be a finite value >= 0");
    }
  }
  if (!(reference_range > 0.0)) {
    throw ConfigError("scene.reference_range", "must be > 0");
  }
  if (max_placement_tries < 1) {
    throw ConfigError("scene.max_placement_tries", "must be >= 1");
  }
}

namespace
{

using pointcloud::LidarPoint;
using pointcloud::RadarPoint;

class Sampler
{
public:
  explicit Sampler(std::uint64_t seed) : rng_(seed) {}

  double uniform(double lo, double hi)
  {
    if (hi <= lo) {
      return lo;
    }
    return std::uniform_real_distribution<double>(lo, hi)(rng_);
  }
  double uniform(const std::pair<double, double> & r) { return uniform(r.first, r.second); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  double normal(double mean, double sigma)
  {
    if (sigma <= 0.0) {
      return mean;
    }
    return std::normal_distribution<double>(mean, sigma)(rng_);
  }
  int poisson(double mean)
  {
    if (mean <= 0.0) {
      return 0;
    }
    return std::poisson_distribution<int>(mean)(rng_);
  }

private:
  std::mt19937_64 rng_;
};

double falloff(double range, double reference)
{
  if (range <= reference) {
    return 1.0;
  }
  const double q = reference / range;
  return q * q;
}

bool footprint_inside(const Box3D & b, const pointcloud::CloudBounds & bounds)
{
  for (const auto & c : bev_corners(b)) {
    if (!(c.x >= bounds.x_min && c.x < bounds.x_max && c.y >= bounds.y_min && c.y < bounds.y_max)) {
      return false;
    }
  }
  return true;
}

double circumradius(const Box3D & b) { return 0.5 * std::hypot(b.l, b.w); }

bool inside_any(const DetectionSet & boxes, double x, double y, double z, double margin)
{
  return std::any_of(boxes.begin(), boxes.end(), [&](const Box3D & b) {
    return point_in_box(b, x, y, z, margin);
  });
}

DetectionSet place_objects(const SceneSpec & spec, Sampler & s)
{
  DetectionSet boxes;
  for (int c = 0; c < kNumClasses; ++c) {
    const auto & m = spec.classes[static_cast<std::size_t>(c)];
    const int count = s.integer(m.count.first, m.count.second);
    for (int k = 0; k < count; ++k) {
      bool placed = false;
      for (int attempt = 0; attempt < spec.max_placement_tries && !placed; ++attempt) {
        Box3D b;
        b.class_id = c;
        b.l = s.uniform(m.length);
        b.w = s.uniform(m.width);
        b.h = s.uniform(m.height);
        b.yaw = normalize_yaw(
          s.integer(0, 3) * (std::numbers::pi / 2.0) + s.uniform(-spec.yaw_jitter, spec.yaw_jitter));
        b.cx = s.uniform(spec.bounds.x_min, spec.bounds.x_max);
        b.cy = s.uniform(spec.bounds.y_min, spec.bounds.y_max);
        b.cz = spec.ground_z + 0.5 * b.h;
        b.score = 1.0;
        if (std::hypot(b.cx, b.cy) < spec.min_range || !footprint_inside(b, spec.bounds)) {
          continue;
        }
        const bool clear = std::none_of(boxes.begin(), boxes.end(), [&](const Box3D & o) {
          return std::hypot(o.cx - b.cx, o.cy - b.cy) <
                 circumradius(o) + circumradius(b) + 2.0 * spec.label_margin + 0.1;
        });
        if (clear) {
          boxes.push_back(b);
          placed = true;
        }
      }
      if (!placed) {
        throw Error(
          std::string("scene generation: could not place a ") + class_name(c) + " after " +
          std::to_string(spec.max_placement_tries) + " attempts");
      }
    }
  }
  return boxes;
}

void sample_object_surface(
  const SceneSpec & spec, const Box3D & b, Sampler & s, pointcloud::LidarCloud & out)
{
  const double base_lambda = s.uniform(0.3, 0.9);
  const double bottom = b.cz - 0.5 * b.h;
  const double top = b.cz + 0.5 * b.h;
  auto emit = [&](double x, double y, double z) {
    LidarPoint p;
    p.x = x + s.normal(0.0, spec.lidar_noise_sigma);
    p.y = y + s.normal(0.0, spec.lidar_noise_sigma);
    p.z = z + s.normal(0.0, spec.lidar_noise_sigma);
    p.reflectance = std::clamp(base_lambda + s.normal(0.0, 0.05), 0.05, 1.0);
    p.fg = true;
    out.push_back(p);
  };

  const auto corners = bev_corners(b);
  for (std::size_t i = 0; i < 4; ++i) {
    const Vec2 & a = corners[i];
    const Vec2 & c = corners[(i + 1) % 4];
    const double ex = c.x - a.x;
    const double ey = c.y - a.y;
    const double mx = 0.5 * (a.x + c.x);
    const double my = 0.5 * (a.y + c.y);
    // Outward normal of a counter-clockwise polygon edge is (ey, -ex).
    if (ey * mx - ex * my >= 0.0) {
      continue;  // facing away from the sensor
    }
    const double len = std::hypot(ex, ey);
    const double expected =
      spec.lidar_density * len * b.h * falloff(std::hypot(mx, my), spec.reference_range);
    const int n = s.poisson(expected);
    for (int k = 0; k < n; ++k) {
      const double t = s.uniform(0.0, 1.0);
      emit(a.x + t * ex, a.y + t * ey, s.uniform(bottom, top));
    }
  }
  const double cy = std::cos(b.yaw);
  const double sy = std::sin(b.yaw);
  const double expected_top =
    spec.lidar_density * b.l * b.w * falloff(std::hypot(b.cx, b.cy), spec.reference_range);
  const int n_top = s.poisson(expected_top);
  for (int k = 0; k < n_top; ++k) {
    const double u = s.uniform(-0.5 * b.l, 0.5 * b.l);
    const double v = s.uniform(-0.5 * b.w, 0.5 * b.w);
    emit(b.cx + cy * u - sy * v, b.cy + sy * u + cy * v, top);
  }
}

void sample_ground(
  const SceneSpec & spec, const DetectionSet & boxes, Sampler & s, pointcloud::LidarCloud & out)
{
  const auto & bd = spec.bounds;
  const double area = (bd.x_max - bd.x_min) * (bd.y_max - bd.y_min);
  const int n = s.poisson(spec.ground_density * area);
  for (int k = 0; k < n; ++k) {
    const double x = s.uniform(bd.x_min, bd.x_max);
    const double y = s.uniform(bd.y_min, bd.y_max);
    const double keep = s.uniform(0.0, 1.0);
    const double z = spec.ground_z + s.normal(0.0, spec.ground_sigma);
    const double lambda = s.uniform(0.05, 0.3);
    if (keep >= falloff(std::hypot(x, y), spec.reference_range)) {
      continue;
    }
    const bool under_object = std::any_of(boxes.begin(), boxes.end(), [&](const Box3D & b) {
      return point_in_box(b, x, y, b.cz, 0.1);
    });
    if (under_object) {
      continue;
    }
    LidarPoint p;
    p.x = x;
    p.y = y;
    p.z = z;
    p.reflectance = lambda;
    p.fg = false;
    out.push_back(p);
  }
}

void set_doppler(RadarPoint & p, double v_abs_x, double v_abs_y, double ego_speed)
{
  const double r = std::max(1e-6, std::sqrt(p.x * p.x + p.y * p.y + p.z * p.z));
  p.v_a = (v_abs_x * p.x + v_abs_y * p.y) / r;
  p.v_r = p.v_a - ego_speed * p.x / r;
}

void sample_radar_object(
  const SceneSpec & spec, const Box3D & b, Sampler & s, pointcloud::RadarCloud & out)
{
  const auto & m = spec.classes[static_cast<std::size_t>(b.class_id)];
  const double speed = s.uniform(m.speed);
  const double vx = speed * std::cos(b.yaw);
  const double vy = speed * std::sin(b.yaw);
  const int n = s.poisson(m.radar_points);
  const double cy = std::cos(b.yaw);
  const double sy = std::sin(b.yaw);
  for (int k = 0; k < n; ++k) {
    RadarPoint p;
    for (int attempt = 0; attempt < 32; ++attempt) {
      const double u = s.uniform(-0.5 * b.l, 0.5 * b.l);
      const double v = s.uniform(-0.5 * b.w, 0.5 * b.w);
      const double w = s.uniform(-0.5 * b.h, 0.5 * b.h);
      p.x = b.cx + cy * u - sy * v + s.normal(0.0, spec.radar_position_sigma);
      p.y = b.cy + sy * u + cy * v + s.normal(0.0, spec.radar_position_sigma);
      p.z = b.cz + w + s.normal(0.0, spec.radar_position_sigma);
      if (point_in_box(b, p.x, p.y, p.z, spec.label_margin)) {
        break;
      }
      p.x = b.cx;
      p.y = b.cy;
      p.z = b.cz;
    }
    set_doppler(p, vx, vy, spec.ego_speed);
    p.rcs = s.normal(m.rcs_mean, m.rcs_sigma);
    p.fg = true;
    out.push_back(p);
  }
}

void sample_radar_noise(
  const SceneSpec & spec, const DetectionSet & boxes, Sampler & s, pointcloud::RadarCloud & out)
{
  const auto & bd = spec.bounds;
  const int n = s.poisson(spec.radar_noise_rate);
  for (int k = 0; k < n; ++k) {
    RadarPoint p;
    bool ok = false;
    for (int attempt = 0; attempt < 64 && !ok; ++attempt) {
      p.x = s.uniform(bd.x_min, bd.x_max);
      p.y = s.uniform(bd.y_min, bd.y_max);
      p.z = s.uniform(std::max(bd.z_min, spec.ground_z), bd.z_max);
      ok = !inside_any(boxes, p.x, p.y, p.z, spec.label_margin);
    }
    if (!ok) {
      continue;
    }
    set_doppler(p, 0.0, 0.0, spec.ego_speed);
    p.v_a = s.normal(0.0, spec.noise_velocity_sigma);
    const double r = std::max(1e-6, std::sqrt(p.x * p.x + p.y * p.y + p.z * p.z));
    p.v_r = p.v_a - spec.ego_speed * p.x / r;
    p.rcs = s.normal(spec.noise_rcs_mean, spec.noise_rcs_sigma);
    p.fg = false;
    out.push_back(p);
  }
}

}  // namespace

Scene generate_scene(const SceneSpec & spec)
{
  spec.validate();
  Sampler s(spec.seed);
  Scene scene;
  scene.gt = place_objects(spec, s);

  pointcloud::LidarCloud lidar;
  for (const auto & b : scene.gt) {
    sample_object_surface(spec, b, s, lidar);
  }
  sample_ground(spec, scene.gt, s, lidar);

  pointcloud::RadarCloud radar;
  for (const auto & b : scene.gt) {
    sample_radar_object(spec, b, s, radar);
  }
  sample_radar_noise(spec, scene.gt, s, radar);

  scene.lidar = pointcloud::crop(lidar, spec.bounds);
  scene.radar = pointcloud::crop(radar, spec.bounds);
  return scene;
}

}  // namespace fusionlab::scenegen
