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

#include "fusionlab/backbone.hpp"

#include "fusionlab/error.hpp"
#include "fusionlab/ops.hpp"

namespace fusionlab::backbone
{

namespace ts = fusionlab::tensor;

const char * fusion_mode_name(FusionMode mode)
{
  switch (mode) {
    case FusionMode::msgf:
      return "msgf";
    case FusionMode::im2:
      return "im2";
    case FusionMode::concat_only:
      return "concat_only";
  }
  return "?";
}

FusionMode parse_fusion_mode(const std::string & name, const std::string & field)
{
  if (name == "msgf") {
    return FusionMode::msgf;
  }
  if (name == "im2") {
    return FusionMode::im2;
  }
  if (name == "concat_only") {
    return FusionMode::concat_only;
  }
  throw ConfigError(field, "unknown fusion mode '" + name + "' (expected msgf, im2 or concat_only)");
}

void BackboneConfig::validate() const
{
  if (in_channels == 0) {
    throw ConfigError("backbone.in_channels", "must be >= 1");
  }
  if (channels.empty() || channels.size() > 4) {
    throw ConfigError("backbone.channels", "must list 1 to 4 stages");
  }
  if (strides.size() != channels.size()) {
    throw ConfigError("backbone.strides", "must have one entry per stage");
  }
  for (std::size_t c : channels) {
    if (c == 0) {
      throw ConfigError("backbone.channels", "widths must be >= 1");
    }
  }
  for (int s : strides) {
    if (s < 1) {
      throw ConfigError("backbone.strides", "strides must be >= 1");
    }
  }
}

std::size_t BackboneConfig::output_channels() const
{
  std::size_t total = 0;
  for (std::size_t c : channels) {
    total += c;
  }
  if (has_intra()) {
    total += 2 * channels.back();
  }
  return total;
}

InterFusion::InterFusion(std::size_t channels, std::mt19937_64 & rng)
: projection(2 * channels, channels, 1, 1, rng, false)
{
}

Tensor InterFusion::forward(Tape & tape, const Tensor & f_l, const Tensor & f_r) const
{
  if (f_l.shape() != f_r.shape()) {
    throw ShapeError(
      "fuse_inter: LiDAR map " + ts::shape_string(f_l.shape()) + " vs radar map " +
      ts::shape_string(f_r.shape()));
  }
  const std::vector<Tensor> parts{f_l, f_r};
  return projection.forward(tape, ts::concat_channels(tape, parts));
}

void InterFusion::collect(const std::string & prefix, nn::StateList & out) const
{
  projection.collect(prefix + ".projection", out);
}

Gate::Gate(std::size_t channels, std::mt19937_64 & rng) : conv(channels, channels, 3, 1, rng, true)
{
}

Tensor Gate::weights(Tape & tape, const Tensor & f_f) const
{
  return ts::sigmoid(tape, conv.forward(tape, f_f));
}

Tensor Gate::forward(Tape & tape, const Tensor & f_m, const Tensor & f_f) const
{
  if (f_m.shape() != f_f.shape()) {
    throw ShapeError(
      "gated_filter: intra map " + ts::shape_string(f_m.shape()) + " vs fused map " +
      ts::shape_string(f_f.shape()));
  }
  return ts::mul(tape, f_m, weights(tape, f_f));
}

void Gate::collect(const std::string & prefix, nn::StateList & out) const
{
  conv.collect(prefix + ".conv", out);
}

Backbone::Backbone(BackboneConfig config, std::mt19937_64 & rng) : config_(std::move(config))
{
  config_.validate();
  fuse = InterFusion(config_.in_channels, rng);
  std::size_t in = config_.in_channels;
  for (std::size_t d = 0; d < config_.channels.size(); ++d) {
    const std::size_t out = config_.channels[d];
    const int stride = config_.strides[d];
    fused_stages.emplace_back(in, out, stride, rng);
    if (config_.has_intra()) {
      lidar_stages.emplace_back(in, out, stride, rng);
      radar_stages.emplace_back(in, out, stride, rng);
    }
    if (config_.fusion_mode == FusionMode::msgf) {
      lidar_gates.emplace_back(out, rng);
      radar_gates.emplace_back(out, rng);
    }
    in = out;
  }
}

BackboneOutput Backbone::forward(
  Tape & tape, const Tensor & f_l, const Tensor & f_r, bool training)
{
  if (f_l.rank() != 3 || f_l.dim(0) != config_.in_channels) {
    throw ShapeError(
      "backbone expects " + std::to_string(config_.in_channels) + " input channels, got map " +
      ts::shape_string(f_l.shape()));
  }
  BackboneOutput out;
  Tensor prev_f = fuse.forward(tape, f_l, f_r);
  Tensor prev_l = f_l;
  Tensor prev_r = f_r;
  for (std::size_t d = 0; d < config_.channels.size(); ++d) {
    StageFeatures stage;
    stage.f_f = fused_stages[d].forward(tape, prev_f, training);
    if (config_.has_intra()) {
      stage.f_l = lidar_stages[d].forward(tape, prev_l, training);
      stage.f_r = radar_stages[d].forward(tape, prev_r, training);
      if (config_.fusion_mode == FusionMode::msgf) {
        stage.f_l = lidar_gates[d].forward(tape, stage.f_l, stage.f_f);
        stage.f_r = radar_gates[d].forward(tape, stage.f_r, stage.f_f);
      }
      prev_l = stage.f_l;
      prev_r = stage.f_r;
    }
    prev_f = stage.f_f;
    out.stages.push_back(stage);
  }

  const std::size_t h1 = out.stages.front().f_f.dim(1);
  const std::size_t w1 = out.stages.front().f_f.dim(2);
  std::vector<Tensor> parts;
  std::size_t factor = 1;
  for (std::size_t d = 0; d < out.stages.size(); ++d) {
    if (d > 0) {
      factor *= static_cast<std::size_t>(config_.strides[d]);
    }
    parts.push_back(
      factor == 1 ? out.stages[d].f_f : ts::upsample_nearest(tape, out.stages[d].f_f, factor, h1, w1));
  }
  if (config_.has_intra()) {
    for (const Tensor & m : {out.stages.back().f_l, out.stages.back().f_r}) {
      parts.push_back(factor == 1 ? m : ts::upsample_nearest(tape, m, factor, h1, w1));
    }
  }
  out.head_input = parts.size() == 1 ? parts.front() : ts::concat_channels(tape, parts);
  return out;
}

void Backbone::collect(const std::string & prefix, nn::StateList & out) const
{
  fuse.collect(prefix + ".fuse", out);
  for (std::size_t d = 0; d < fused_stages.size(); ++d) {
    const std::string s = std::to_string(d + 1);
    fused_stages[d].collect(prefix + ".fused" + s, out);
    if (!lidar_stages.empty()) {
      lidar_stages[d].collect(prefix + ".lidar" + s, out);
      radar_stages[d].collect(prefix + ".radar" + s, out);
    }
    if (!lidar_gates.empty()) {
      lidar_gates[d].collect(prefix + ".lidar_gate" + s, out);
      radar_gates[d].collect(prefix + ".radar_gate" + s, out);
    }
  }
}

std::size_t analytic_parameter_count(const BackboneConfig & config)
{
  config.validate();
  const std::size_t c0 = config.in_channels;
  std::size_t total = 2 * c0 * c0;  // 1x1 fusion projection
  std::size_t in = c0;
  for (std::size_t out : config.channels) {
    const std::size_t block = 9 * in * out + 2 * out;  // conv without bias + BN affine
    total += block;
    if (config.has_intra()) {
      total += 2 * block;
    }
    if (config.fusion_mode == FusionMode::msgf) {
      total += 2 * (9 * out * out + out);
    }
    in = out;
  }
  return total;
}

}  // namespace fusionlab::backbone
