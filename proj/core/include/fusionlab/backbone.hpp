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

#ifndef FUSIONLAB__BACKBONE_HPP_
#define FUSIONLAB__BACKBONE_HPP_

#include <cstddef>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "fusionlab/nn.hpp"

// Three-branch BEV backbone: an inter-modal branch over the fused map and two
// intra-modal branches, with sigmoid gates computed from the fused features
// filtering the intra branches at every stage.
namespace fusionlab::backbone
{

using tensor::Tape;
using tensor::Tensor;

enum class FusionMode {
  msgf,         // intra branches gated by the fused features at every stage
  im2,          // intra branches without gates
  concat_only,  // fused branch only
};

const char * fusion_mode_name(FusionMode mode);
/// Throws ConfigError naming `field` for unknown names.
FusionMode parse_fusion_mode(const std::string & name, const std::string & field = "backbone.fusion_mode");

struct BackboneConfig
{
  std::size_t in_channels{64};
  std::vector<std::size_t> channels{64, 128, 256};
  std::vector<int> strides{1, 2, 2};
  FusionMode fusion_mode{FusionMode::msgf};

  void validate() const;
  bool has_intra() const { return fusion_mode != FusionMode::concat_only; }
  /// Channels of the head input.
  std::size_t output_channels() const;
};

/// Concatenation followed by a 1x1 projection (no bias) back to the input width.
class InterFusion
{
public:
  InterFusion() = default;
  InterFusion(std::size_t channels, std::mt19937_64 & rng);
  Tensor forward(Tape & tape, const Tensor & f_l, const Tensor & f_r) const;
  void collect(const std::string & prefix, nn::StateList & out) const;
  nn::Conv2d projection;  // C x 2C x 1 x 1
};

/// f_m * sigmoid(conv3x3(f_f)).
class Gate
{
public:
  Gate() = default;
  Gate(std::size_t channels, std::mt19937_64 & rng);
  Tensor forward(Tape & tape, const Tensor & f_m, const Tensor & f_f) const;
  /// Gate values sigmoid(conv3x3(f_f)) alone.
  Tensor weights(Tape & tape, const Tensor & f_f) const;
  void collect(const std::string & prefix, nn::StateList & out) const;
  nn::Conv2d conv;
};

struct StageFeatures
{
  Tensor f_l;  // undefined without intra branches
  Tensor f_r;
  Tensor f_f;
};

struct BackboneOutput
{
  std::vector<StageFeatures> stages;
  Tensor head_input;  // C_out x H_1 x W_1
};

class Backbone
{
public:
  Backbone() = default;
  Backbone(BackboneConfig config, std::mt19937_64 & rng);

  BackboneOutput forward(Tape & tape, const Tensor & f_l, const Tensor & f_r, bool training);
  void collect(const std::string & prefix, nn::StateList & out) const;
  const BackboneConfig & config() const { return config_; }

  InterFusion fuse;
  std::vector<nn::ConvBlock> fused_stages;
  std::vector<nn::ConvBlock> lidar_stages;
  std::vector<nn::ConvBlock> radar_stages;
  std::vector<Gate> lidar_gates;
  std::vector<Gate> radar_gates;

private:
  BackboneConfig config_;
};

/// Trainable parameter count predicted from the configuration alone.
std::size_t analytic_parameter_count(const BackboneConfig & config);

}  // namespace fusionlab::backbone

#endif  // FUSIONLAB__BACKBONE_HPP_
