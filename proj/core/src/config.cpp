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

#include "fusionlab/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <toml.hpp>

#include "fusionlab/error.hpp"

namespace fusionlab::config
{

void TrainConfig::validate() const
{
  if (epochs < 0) {
    throw ConfigError("train.epochs", "must be >= 0");
  }
  if (batch_size < 1) {
    throw ConfigError("train.batch_size", "must be >= 1");
  }
  if (!(lr > 0.0)) {
    throw ConfigError("train.lr", "must be > 0");
  }
  if (fog_levels.empty()) {
    throw ConfigError("train.fog_levels", "must list at least one level");
  }
  for (int level : fog_levels) {
    if (level < 0 || level >= static_cast<int>(fogsim::kFogLevelAlpha.size())) {
      throw ConfigError("train.fog_levels", "levels must be in [0, 4]");
    }
  }
  if (threads < 1) {
    throw ConfigError("train.threads", "must be >= 1");
  }
}

Config::Config() { model.grid.bounds = scene.bounds; }

void Config::validate() const
{
  scene.validate();
  fog.validate();
  model.validate();
  train.validate();
  eval.validate();
}

namespace
{

constexpr std::uint64_t kMaxSeed = static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max());

// ---------------------------------------------------------------------------
// One description of every field, walked by three visitors: a collector of
// section names, a reader and a writer.

template <typename V>
void visit_config(V & v, Config & c)
{
  auto & sc = c.scene;
  v.section("scene");
  v.field("seed", sc.seed);
  v.field("bounds", sc.bounds);
  v.field("ground_z", sc.ground_z);
  v.field("ground_sigma", sc.ground_sigma);
  v.field("ground_density", sc.ground_density);
  v.field("lidar_density", sc.lidar_density);
  v.field("reference_range", sc.reference_range);
  v.field("lidar_noise_sigma", sc.lidar_noise_sigma);
  v.field("radar_noise_rate", sc.radar_noise_rate);
  v.field("radar_position_sigma", sc.radar_position_sigma);
  v.field("noise_velocity_sigma", sc.noise_velocity_sigma);
  v.field("noise_rcs_mean", sc.noise_rcs_mean);
  v.field("noise_rcs_sigma", sc.noise_rcs_sigma);
  v.field("ego_speed", sc.ego_speed);
  v.field("yaw_jitter", sc.yaw_jitter);
  v.field("min_range", sc.min_range);
  v.field("label_margin", sc.label_margin);
  v.field("max_placement_tries", sc.max_placement_tries);
  for (int k = 0; k < kNumClasses; ++k) {
    auto & m = sc.classes[static_cast<std::size_t>(k)];
    v.section(std::string("scene.") + class_name(k));
    v.field("count", m.count);
    v.field("length", m.length);
    v.field("width", m.width);
    v.field("height", m.height);
    v.field("speed", m.speed);
    v.field("rcs_mean", m.rcs_mean);
    v.field("rcs_sigma", m.rcs_sigma);
    v.field("radar_points", m.radar_points);
  }

  v.section("fog");
  v.field("scatter_rate", c.fog.scatter_rate);
  v.field("min_reflectance", c.fog.min_reflectance);
  v.field("scatter_mean_range", c.fog.scatter_mean_range);
  v.field("scatter_reflectance_max", c.fog.scatter_reflectance_max);

  auto & m = c.model;
  v.section("model");
  v.field("use_radar", m.toggles.radar);
  v.field("init_seed", m.init_seed);

  v.section("fad");
  v.field("enabled", m.toggles.fad);
  v.field("tau_train", m.fad.tau_train);
  v.field("tau_infer", m.fad.tau_infer);
  v.field("k_neighbors", m.fad.k_neighbors);
  v.field("hidden_dims", m.fad.hidden_dims);
  v.field("focal_alpha", m.fad.focal_alpha);
  v.field("focal_gamma", m.fad.focal_gamma);

  v.section("mme");
  v.field("enabled", m.toggles.mme);
  v.field("bounds", m.grid.bounds);
  v.field("cell_x", m.grid.cell_x);
  v.field("cell_y", m.grid.cell_y);
  v.field("max_points_per_pillar", m.grid.max_points_per_pillar);
  v.field("max_pillars", m.grid.max_pillars);
  v.field("channels", m.bev_channels);

  v.section("backbone");
  v.field("fusion_mode", m.backbone.fusion_mode);
  v.field("channels", m.backbone.channels);
  v.field("strides", m.backbone.strides);

  v.section("detect");
  v.field("anchor_car", m.anchors.sizes[0]);
  v.field("anchor_pedestrian", m.anchors.sizes[1]);
  v.field("anchor_cyclist", m.anchors.sizes[2]);
  v.field("positive_iou", m.anchors.positive_iou);
  v.field("negative_iou", m.anchors.negative_iou);
  v.field("force_match", m.anchors.force_match);
  v.field("focal_alpha", m.loss.focal_alpha);
  v.field("focal_gamma", m.loss.focal_gamma);
  v.field("smooth_l1_beta", m.loss.smooth_l1_beta);
  v.field("beta_cls", m.loss_weights.cls);
  v.field("beta_loc", m.loss_weights.loc);
  v.field("beta_fad", m.loss_weights.fad);
  v.field("score_threshold", m.decode.score_threshold);
  v.field("nms_iou", m.decode.nms_iou);
  v.field("pre_nms_top_k", m.decode.pre_nms_top_k);
  v.field("max_detections", m.decode.max_detections);

  v.section("train");
  v.field("epochs", c.train.epochs);
  v.field("batch_size", c.train.batch_size);
  v.field("lr", c.train.lr);
  v.field("seed", c.train.seed);
  v.field("fog_levels", c.train.fog_levels);
  v.field("threads", c.train.threads);

  v.section("eval");
  v.field("iou_threshold", c.eval.iou_threshold);
  v.field("recall_positions", c.eval.recall_positions);
  v.field("area", c.eval.area);
  v.field("range_stratum", c.eval.range_stratum);
}

struct SectionCollector
{
  std::set<std::string> names;
  void section(const std::string & name) { names.insert(name); }
  template <typename T>
  void field(const char *, T &)
  {
  }
};

const std::set<std::string> & section_names()
{
  static const std::set<std::string> names = [] {
    SectionCollector c;
    Config dummy;
    visit_config(c, dummy);
    return c.names;
  }();
  return names;
}

// ---------------------------------------------------------------------------
// Reading.

class Reader
{
public:
  explicit Reader(const toml::table & root) : root_(root) { check_tables(root_, ""); }

  void section(const std::string & name)
  {
    finish();
    path_ = name;
    used_.clear();
    current_ = &root_;
    std::size_t start = 0;
    while (current_ != nullptr && start <= name.size()) {
      const std::size_t dot = name.find('.', start);
      const std::string part = name.substr(start, dot == std::string::npos ? dot : dot - start);
      const toml::node * n = current_->get(part);
      current_ = n != nullptr ? n->as_table() : nullptr;
      if (dot == std::string::npos) {
        break;
      }
      start = dot + 1;
    }
  }

  template <typename T>
  void field(const char * key, T & out)
  {
    used_.insert(key);
    if (current_ == nullptr) {
      return;
    }
    const toml::node * n = current_->get(key);
    if (n == nullptr) {
      return;
    }
    read(*n, out, path_ + "." + key);
  }

  void finish()
  {
    if (current_ == nullptr) {
      return;
    }
    for (const auto & [k, node] : *current_) {
      const std::string key(k.str());
      if (used_.count(key)) {
        continue;
      }
      if (node.is_table() && section_names().count(path_ + "." + key)) {
        continue;
      }
      throw ConfigError(path_ + "." + key, "unknown key");
    }
    current_ = nullptr;
  }

private:
  const toml::table & root_;
  const toml::table * current_{nullptr};
  std::string path_;
  std::set<std::string> used_;

  static void check_tables(const toml::table & root, const std::string & prefix)
  {
    for (const auto & [k, node] : root) {
      const std::string name = prefix.empty() ? std::string(k.str()) : prefix + "." + std::string(k.str());
      if (prefix.empty() && !node.is_table()) {
        throw ConfigError(name, "top-level keys must be sections");
      }
      if (prefix.empty() && !section_names().count(name)) {
        throw ConfigError(name, "unknown section");
      }
    }
  }

  static const char * type_name(const toml::node & n)
  {
    switch (n.type()) {
      case toml::node_type::string:
        return "a string";
      case toml::node_type::integer:
        return "an integer";
      case toml::node_type::floating_point:
        return "a float";
      case toml::node_type::boolean:
        return "a boolean";
      case toml::node_type::array:
        return "an array";
      case toml::node_type::table:
        return "a table";
      default:
        return "an unsupported value";
    }
  }

  [[noreturn]] static void mismatch(const toml::node & n, const std::string & field, const char * want)
  {
    throw ConfigError(field, std::string("expected ") + want + ", got " + type_name(n));
  }

  static void read(const toml::node & n, double & out, const std::string & field)
  {
    if (auto v = n.value_exact<double>()) {
      out = *v;
    } else if (auto i = n.value_exact<std::int64_t>()) {
      out = static_cast<double>(*i);
    } else {
      mismatch(n, field, "a number");
    }
  }

  static void read(const toml::node & n, std::int64_t & out, const std::string & field)
  {
    if (auto i = n.value_exact<std::int64_t>()) {
      out = *i;
    } else {
      mismatch(n, field, "an integer");
    }
  }

  static void read(const toml::node & n, int & out, const std::string & field)
  {
    std::int64_t v = 0;
    read(n, v, field);
    if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) {
      throw ConfigError(field, "integer out of range");
    }
    out = static_cast<int>(v);
  }

  static void read(const toml::node & n, std::uint64_t & out, const std::string & field)
  {
    std::int64_t v = 0;
    read(n, v, field);
    if (v < 0) {
      throw ConfigError(field, "must be >= 0");
    }
    out = static_cast<std::uint64_t>(v);
  }

  static void read(const toml::node & n, bool & out, const std::string & field)
  {
    if (auto b = n.value_exact<bool>()) {
      out = *b;
    } else {
      mismatch(n, field, "a boolean");
    }
  }

  static void read(const toml::node & n, std::string & out, const std::string & field)
  {
    if (auto s = n.value_exact<std::string>()) {
      out = *s;
    } else {
      mismatch(n, field, "a string");
    }
  }

  static void read(const toml::node & n, backbone::FusionMode & out, const std::string & field)
  {
    std::string s;
    read(n, s, field);
    out = backbone::parse_fusion_mode(s, field);
  }

  static const toml::array & array_of(
    const toml::node & n, const std::string & field, std::size_t expected = 0)
  {
    const toml::array * a = n.as_array();
    if (a == nullptr) {
      mismatch(n, field, "an array");
    }
    if (expected != 0 && a->size() != expected) {
      throw ConfigError(
        field, "expected " + std::to_string(expected) + " elements, got " + std::to_string(a->size()));
    }
    return *a;
  }

  template <typename T>
  static void read(const toml::node & n, std::vector<T> & out, const std::string & field)
  {
    const auto & a = array_of(n, field);
    std::vector<T> values(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      read(a[i], values[i], field + "[" + std::to_string(i) + "]");
    }
    out = std::move(values);
  }

  template <typename T, std::size_t N>
  static void read(const toml::node & n, std::array<T, N> & out, const std::string & field)
  {
    const auto & a = array_of(n, field, N);
    for (std::size_t i = 0; i < N; ++i) {
      read(a[i], out[i], field + "[" + std::to_string(i) + "]");
    }
  }

  template <typename T>
  static void read(const toml::node & n, std::pair<T, T> & out, const std::string & field)
  {
    std::array<T, 2> a{};
    read(n, a, field);
    out = {a[0], a[1]};
  }

  static void read(const toml::node & n, pointcloud::CloudBounds & out, const std::string & field)
  {
    std::array<double, 6> a{};
    read(n, a, field);
    out = {a[0], a[1], a[2], a[3], a[4], a[5]};
  }

  static void read(const toml::node & n, detect::AnchorSize & out, const std::string & field)
  {
    std::array<double, 4> a{};
    read(n, a, field);
    out = {a[0], a[1], a[2], a[3]};
  }

  template <typename T>
  static void read(const toml::node & n, std::optional<T> & out, const std::string & field)
  {
    T value{};
    read(n, value, field);
    out = value;
  }
};

// ---------------------------------------------------------------------------
// Writing.

std::string format_double(double v)
{
  if (std::isnan(v)) {
    return "nan";
  }
  if (std::isinf(v)) {
    return v > 0 ? "inf" : "-inf";
  }
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  std::string s(buf, res.ptr);
  if (s.find_first_of(".e") == std::string::npos) {
    s += ".0";
  }
  return s;
}

class Writer
{
public:
  void section(const std::string & name)
  {
    if (!out_.str().empty()) {
      out_ << '\n';
    }
    out_ << '[' << name << "]\n";
  }

  template <typename T>
  void field(const char * key, T & value)
  {
    std::string s;
    if (format(value, s)) {
      out_ << key << " = " << s << '\n';
    }
  }

  std::string str() const { return out_.str(); }

private:
  std::ostringstream out_;

  static bool format(double v, std::string & s)
  {
    s = format_double(v);
    return true;
  }
  static bool format(int v, std::string & s)
  {
    s = std::to_string(v);
    return true;
  }
  static bool format(std::uint64_t v, std::string & s)
  {
    s = std::to_string(v);
    return true;
  }
  static bool format(bool v, std::string & s)
  {
    s = v ? "true" : "false";
    return true;
  }
  static bool format(const std::string & v, std::string & s)
  {
    std::ostringstream os;
    os << toml::value<std::string>(v);
    s = os.str();
    return true;
  }
  static bool format(backbone::FusionMode v, std::string & s)
  {
    return format(std::string(backbone::fusion_mode_name(v)), s);
  }
  template <typename Range>
  static std::string join(const Range & r)
  {
    std::string s = "[";
    bool first = true;
    for (auto v : r) {
      std::string item;
      format(v, item);
      s += (first ? "" : ", ") + item;
      first = false;
    }
    return s + "]";
  }
  template <typename T>
  static bool format(const std::vector<T> & v, std::string & s)
  {
    s = join(v);
    return true;
  }
  template <typename T, std::size_t N>
  static bool format(const std::array<T, N> & v, std::string & s)
  {
    s = join(v);
    return true;
  }
  template <typename T>
  static bool format(const std::pair<T, T> & v, std::string & s)
  {
    s = join(std::array<T, 2>{v.first, v.second});
    return true;
  }
  static bool format(const pointcloud::CloudBounds & b, std::string & s)
  {
    s = join(std::array<double, 6>{b.x_min, b.x_max, b.y_min, b.y_max, b.z_min, b.z_max});
    return true;
  }
  static bool format(const detect::AnchorSize & a, std::string & s)
  {
    s = join(std::array<double, 4>{a.l, a.w, a.h, a.z});
    return true;
  }
  template <typename T>
  static bool format(const std::optional<T> & v, std::string & s)
  {
    return v ? format(*v, s) : false;
  }
};

void check_seed(std::uint64_t seed, const char * field)
{
  if (seed > kMaxSeed) {
    throw ConfigError(field, "must be < 2^63");
  }
}

toml::table parse_table(std::string_view text, const std::string & what)
{
  try {
    return toml::parse(text);
  } catch (const toml::parse_error & e) {
    std::ostringstream os;
    os << e.description() << " (line " << e.source().begin.line << ")";
    throw ConfigError(what, os.str());
  }
}

}  // namespace

Config parse_config(std::string_view text)
{
  const toml::table root = parse_table(text, "config");
  Config c;
  Reader reader(root);
  visit_config(reader, c);
  reader.finish();
  c.model.backbone.in_channels = c.model.bev_channels;
  check_seed(c.scene.seed, "scene.seed");
  check_seed(c.model.init_seed, "model.init_seed");
  check_seed(c.train.seed, "train.seed");
  c.validate();
  return c;
}

Config load_config(const std::filesystem::path & path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ConfigError("config", "cannot open '" + path.string() + "'");
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string to_toml(const Config & config)
{
  Writer w;
  Config copy = config;
  visit_config(w, copy);
  return w.str();
}

Config apply_overrides(const Config & config, std::span<const std::string> overrides)
{
  if (overrides.empty()) {
    return config;
  }
  toml::table root = parse_table(to_toml(config), "config");
  for (const auto & item : overrides) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw ConfigError(item, "override must look like section.key=value");
    }
    std::string key = item.substr(0, eq);
    std::string value = item.substr(eq + 1);
    const auto trim = [](std::string & s) {
      const auto b = s.find_first_not_of(" \t");
      const auto e = s.find_last_not_of(" \t");
      s = b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    trim(key);
    trim(value);
    const auto dot = key.rfind('.');
    if (dot == std::string::npos) {
      throw ConfigError(key, "override key must name a section and a key");
    }
    toml::table parsed;
    try {
      parsed = toml::parse("v = " + value);
    } catch (const toml::parse_error &) {
      parsed = toml::table{{"v", value}};
    }
    toml::table * section = &root;
    const std::string section_path = key.substr(0, dot);
    std::size_t start = 0;
    while (true) {
      const auto next = section_path.find('.', start);
      const std::string part =
        section_path.substr(start, next == std::string::npos ? next : next - start);
      if (!section->contains(part)) {
        section->insert(part, toml::table{});
      }
      section = (*section)[part].as_table();
      if (section == nullptr) {
        throw ConfigError(key, "'" + part + "' is not a section");
      }
      if (next == std::string::npos) {
        break;
      }
      start = next + 1;
    }
    section->insert_or_assign(key.substr(dot + 1), *parsed.get("v"));
  }
  std::ostringstream os;
  os << root;
  return parse_config(os.str());
}

std::uint64_t fnv1a64(std::string_view bytes)
{
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string config_hash(const Config & config)
{
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a64(to_toml(config))));
  return buf;
}

}  // namespace fusionlab::config
