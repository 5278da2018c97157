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

#include "fusionlab/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "fusionlab/error.hpp"
#include "fusionlab/ops.hpp"

namespace fusionlab::model
{

namespace ts = fusionlab::tensor;

void ModelConfig::validate() const
{
  fad.validate();
  grid.validate();
  if (bev_channels == 0) {
    throw ConfigError("mme.channels", "must be >= 1");
  }
  backbone.validate();
  anchors.validate();
  if (!(decode.score_threshold >= 0.0 && decode.score_threshold <= 1.0)) {
    throw ConfigError("detect.score_threshold", "must be in [0, 1]");
  }
  if (!(decode.nms_iou > 0.0 && decode.nms_iou <= 1.0)) {
    throw ConfigError("detect.nms_iou", "must be in (0, 1]");
  }
  if (!toggles.radar && (toggles.fad || toggles.mme)) {
    throw ConfigError("model.use_radar", "denoising and cross-modal encoding need radar input");
  }
}

const std::set<std::string> & component_names()
{
  static const std::set<std::string> names{"mme", "fad", "im2", "msgf"};
  return names;
}

void apply_components(ModelConfig & config, const std::set<std::string> & components)
{
  for (const auto & c : components) {
    if (!component_names().count(c)) {
      throw ConfigError("ablate.rows", "unknown component '" + c + "'");
    }
  }
  const bool msgf = components.count("msgf") > 0;
  const bool im2 = components.count("im2") > 0;
  if (msgf && !im2) {
    throw ConfigError("ablate.rows", "msgf requires im2");
  }
  config.toggles.radar = !components.empty();
  config.toggles.mme = components.count("mme") > 0;
  config.toggles.fad = components.count("fad") > 0;
  config.backbone.fusion_mode = msgf  ? backbone::FusionMode::msgf
                                : im2 ? backbone::FusionMode::im2
                                      : backbone::FusionMode::concat_only;
}

std::string components_label(const std::set<std::string> & components)
{
  if (components.empty()) {
    return "lidar_only";
  }
  std::string out;
  for (const char * name : {"mme", "fad", "im2", "msgf"}) {
    if (components.count(name)) {
      out += out.empty() ? name : std::string("+") + name;
    }
  }
  if (out.empty()) {
    out = "concat";
  }
  return out;
}

detect::AnchorGrid make_anchor_grid(const ModelConfig & config)
{
  const int s = config.backbone.strides.front();
  const auto out_dim = [s](std::size_t n) {
    return (n + 2 - 3) / static_cast<std::size_t>(s) + 1;
  };
  const double step = static_cast<double>(s);
  return detect::AnchorGrid(
    out_dim(config.grid.rows()), out_dim(config.grid.cols()), config.grid.bounds.x_min,
    config.grid.bounds.y_min, config.grid.cell_x * step, config.grid.cell_y * step,
    config.anchors);
}

namespace
{

ModelConfig prepared(ModelConfig config)
{
  config.backbone.in_channels = config.bev_channels;
  config.validate();
  return config;
}

void scale_weights(nn::Conv2d & conv, double factor)
{
  for (double & v : conv.weight.mutable_data()) {
    v *= factor;
  }
}

}  // namespace

L4drModel::L4drModel(ModelConfig config)
: config_(prepared(std::move(config))), anchors_(make_anchor_grid(config_))
{
  std::mt19937_64 rng(config_.init_seed);
  fad = fad::FadModel(config_.fad, rng);
  lidar_encoder = mme::PillarEncoder(config_.bev_channels, rng);
  radar_encoder = mme::PillarEncoder(config_.bev_channels, rng);
  net = backbone::Backbone(config_.backbone, rng);
  const std::size_t head_in = config_.backbone.output_channels();
  cls_head = nn::Conv2d(head_in, detect::kAnchorsPerCell, 1, 1, rng, true);
  reg_head = nn::Conv2d(head_in, detect::kAnchorsPerCell * detect::kBoxParams, 1, 1, rng, true);
  scale_weights(cls_head, 0.1);
  scale_weights(reg_head, 0.1);
  // Prior foreground probability of 1% per anchor.
  for (double & b : cls_head.bias.mutable_data()) {
    b = -std::log(99.0);
  }
}

Output L4drModel::forward(
  Tape & tape, const pointcloud::LidarCloud & lidar, const pointcloud::RadarCloud & radar,
  bool training)
{
  Output out;
  out.fad_loss = Tensor::scalar(0.0);
  pointcloud::RadarCloud kept;
  if (config_.toggles.radar) {
    out.radar_in = radar.size();
    if (config_.toggles.fad && !radar.empty()) {
      const Tensor logits = fad.logits(tape, radar);
      const auto labels = pointcloud::labels_of(radar);
      const bool labelled =
        std::all_of(labels.begin(), labels.end(), [](const auto & l) { return l.has_value(); });
      if (labelled) {
        out.fad_loss = fad::fad_loss_from_logits(
          tape, logits, labels, config_.fad.focal_alpha, config_.fad.focal_gamma);
      }
      std::vector<double> scores;
      scores.reserve(radar.size());
      for (double z : logits.data()) {
        scores.push_back(1.0 / (1.0 + std::exp(-z)));
      }
      const double tau = training ? config_.fad.tau_train : config_.fad.tau_infer;
      kept = fad::filter_foreground(radar, scores, tau);
    } else {
      kept = radar;
    }
  }
  out.radar_kept = kept.size();

  const auto pillars = mme::pillarize(lidar, kept, config_.grid);
  const auto rows =
    config_.toggles.mme ? mme::bidirectional_fuse(pillars) : mme::widen_unfused(pillars);
  const auto bev = mme::pillars_to_bev(tape, rows, lidar_encoder, radar_encoder, config_.grid);
  const auto features = net.forward(tape, bev.f_l, bev.f_r, training);
  out.cls_logits = cls_head.forward(tape, features.head_input);
  out.reg_preds = reg_head.forward(tape, features.head_input);
  return out;
}

Losses L4drModel::losses(Tape & tape, const Output & output, const detect::Targets & targets) const
{
  const auto parts =
    detect::detection_losses(tape, output.cls_logits, output.reg_preds, targets, config_.loss);
  Losses l;
  l.cls = parts.cls;
  l.loc = parts.loc;
  l.fad = output.fad_loss;
  l.total = detect::combine_losses(tape, l.cls, l.loc, l.fad, config_.loss_weights);
  return l;
}

DetectionSet L4drModel::detect(
  const pointcloud::LidarCloud & lidar, const pointcloud::RadarCloud & radar)
{
  auto tape = Tape::inference();
  const Output out = forward(tape, lidar, radar, false);
  return detect::decode_and_nms(out.cls_logits, out.reg_preds, anchors_, config_.decode);
}

nn::StateList L4drModel::state() const
{
  nn::StateList s;
  if (config_.toggles.fad) {
    fad.collect("fad", s);
  }
  lidar_encoder.collect("mme.lidar", s);
  if (config_.toggles.radar) {
    radar_encoder.collect("mme.radar", s);
  }
  net.collect("backbone", s);
  cls_head.collect("head.cls", s);
  reg_head.collect("head.reg", s);
  return s;
}

void L4drModel::set_tau_infer(double tau)
{
  if (!(tau >= 0.0 && tau <= 1.0)) {
    throw ConfigError("fad.tau_infer", "must be in [0, 1]");
  }
  config_.fad.tau_infer = tau;
}

std::size_t L4drModel::parameter_count() const { return nn::parameter_count(state()); }

}  // namespace fusionlab::model
