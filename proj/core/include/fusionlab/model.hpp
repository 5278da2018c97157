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

#ifndef FUSIONLAB__MODEL_HPP_
#define FUSIONLAB__MODEL_HPP_

#include <cstdint>
#include <set>
#include <string>

#include "fusionlab/backbone.hpp"
#include "fusionlab/detect.hpp"
#include "fusionlab/fad.hpp"
#include "fusionlab/mme.hpp"
#include "fusionlab/nn.hpp"

// The full detector: radar denoising, multi-modal pillar encoding, the
// three-branch backbone and the anchor head, with switches for every
// component.
namespace fusionlab::model
{

using tensor::Tape;
using tensor::Tensor;

struct Toggles
{
  bool radar{true};  // false: the radar cloud is ignored entirely (LiDAR-only detector)
  bool fad{true};    // radar denoising before encoding, plus its loss term
  bool mme{true};    // cross-modal exchange inside pillars
};

struct ModelConfig
{
  fad::FadConfig fad;
  mme::PillarGridSpec grid;
  std::size_t bev_channels{64};
  backbone::BackboneConfig backbone;  // in_channels follows bev_channels
  detect::AnchorConfig anchors;
  detect::LossOptions loss;
  detect::LossWeights loss_weights;
  detect::DecodeOptions decode;
  Toggles toggles;
  std::uint64_t init_seed{0};

  void validate() const;
};

/// Component names accepted by ablation rows.
const std::set<std::string> & component_names();

/// Applies an ablation row: the empty set is the LiDAR-only detector; any
/// other set fuses radar with the listed components. "msgf" requires "im2".
void apply_components(ModelConfig & config, const std::set<std::string> & components);

/// Readable name of a component set ("lidar_only" or e.g. "mme+fad").
std::string components_label(const std::set<std::string> & components);

struct Output
{
  Tensor cls_logits;  // A x H x W
  Tensor reg_preds;   // 7A x H x W
  Tensor fad_loss;    // scalar; zero when denoising is off or labels are absent
  std::size_t radar_in{0};
  std::size_t radar_kept{0};
};

struct Losses
{
  Tensor total;
  Tensor cls;
  Tensor loc;
  Tensor fad;
};

class L4drModel
{
public:
  explicit L4drModel(ModelConfig config);

  /// `training` selects batch-norm mode and the training denoising threshold.
  Output forward(
    Tape & tape, const pointcloud::LidarCloud & lidar, const pointcloud::RadarCloud & radar,
    bool training);

  Losses losses(Tape & tape, const Output & output, const detect::Targets & targets) const;

  /// Eval-mode forward pass, decoded and suppressed.
  DetectionSet detect(const pointcloud::LidarCloud & lidar, const pointcloud::RadarCloud & radar);

  /// Every tensor of the model; buffers are marked non-trainable.
  nn::StateList state() const;
  std::size_t parameter_count() const;

  const ModelConfig & config() const { return config_; }
  /// Denoising threshold used in eval mode.
  void set_tau_infer(double tau);
  const detect::AnchorGrid & anchors() const { return anchors_; }

  fad::FadModel fad;
  mme::PillarEncoder lidar_encoder;
  mme::PillarEncoder radar_encoder;
  backbone::Backbone net;
  nn::Conv2d cls_head;
  nn::Conv2d reg_head;

private:
  ModelConfig config_;
  detect::AnchorGrid anchors_;
};

/// Anchor grid at the head resolution of `config`.
detect::AnchorGrid make_anchor_grid(const ModelConfig & config);

}  // namespace fusionlab::model

#endif  // FUSIONLAB__MODEL_HPP_
