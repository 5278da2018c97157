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

#ifndef FUSIONLAB__FAD_HPP_
#define FUSIONLAB__FAD_HPP_

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "fusionlab/nn.hpp"
#include "fusionlab/pointcloud.hpp"

// Foreground-aware denoising of radar clouds: a per-point scorer, a threshold
// filter, the segmentation loss and the denoising metric suite.
namespace fusionlab::fad
{

using tensor::Tape;
using tensor::Tensor;

struct FadConfig
{
  double tau_train{0.3};
  double tau_infer{0.2};
  int k_neighbors{8};
  /// Width of the per-point MLP layers; the last entry is also the width of
  /// the neighbourhood and head layers.
  std::vector<std::size_t> hidden_dims{32, 32};
  double focal_alpha{0.25};
  double focal_gamma{2.0};

  void validate() const;
};

/// Number of per-point input features: x, y, z, v_r, v_a, rcs.
constexpr std::size_t kPointFeatures = 6;
/// Fixed input normalisation: positions in the plane / 25 m, height / 2 m,
/// velocities / 10 m/s, RCS / 10 dBsm.
constexpr double kPlaneScale = 25.0;
constexpr double kHeightScale = 2.0;
constexpr double kVelocityScale = 10.0;
constexpr double kRcsScale = 10.0;
/// Neighbour offsets are divided by this length [m].
constexpr double kOffsetScale = 2.0;

/// N x 6 normalised feature matrix.
Tensor point_features(const pointcloud::RadarCloud & cloud);

/// Indices of the min(k, N) nearest points of every point (itself included),
/// ordered by distance then index; brute force.
std::vector<std::vector<std::size_t>> nearest_neighbors(
  const pointcloud::RadarCloud & cloud, int k);

/// PointNet-lite scorer: per-point MLP, an edge MLP over
/// [h_j, (p_j - p_i) / kOffsetScale] max-pooled over the k nearest neighbours,
/// then a head MLP on [h_i, pooled_i] producing one logit per point.
class FadModel
{
public:
  FadModel() = default;
  FadModel(FadConfig config, std::mt19937_64 & rng);

  /// N x 1 logits.
  Tensor logits(Tape & tape, const pointcloud::RadarCloud & cloud) const;
  void collect(const std::string & prefix, nn::StateList & out) const;
  const FadConfig & config() const { return config_; }

  std::vector<nn::Linear> point_mlp;
  nn::Linear edge;
  nn::Linear head_hidden;
  nn::Linear head_out;

private:
  FadConfig config_;
};

/// Foreground probabilities (eval mode, no tape).
std::vector<double> score_points(const FadModel & model, const pointcloud::RadarCloud & cloud);

/// Indices i with scores[i] >= tau, ascending.
std::vector<std::size_t> kept_indices(std::span<const double> scores, double tau);

/// Points whose score is at least `tau`, order preserved.
pointcloud::RadarCloud filter_foreground(
  const pointcloud::RadarCloud & cloud, std::span<const double> scores, double tau);

/// Labels as 0/1 targets; throws FormatError naming the first unlabeled point.
std::vector<double> label_targets(std::span<const std::optional<bool>> labels);

/// Mean focal loss over points, evaluated on probabilities (N x 1 or N).
Tensor fad_loss(
  Tape & tape, const Tensor & probs, std::span<const std::optional<bool>> labels,
  double alpha = 0.25, double gamma = 2.0);

/// Same loss from logits; numerically stable, used for training.
Tensor fad_loss_from_logits(
  Tape & tape, const Tensor & logits, std::span<const std::optional<bool>> labels,
  double alpha = 0.25, double gamma = 2.0);

struct DenoiseMetrics
{
  double denoise_rate{0.0};  // % of noise points removed
  double recall{0.0};        // % of foreground points kept
  double miou{0.0};          // mean of foreground and background IoU, %
  double pa{0.0};            // point accuracy, %
  bool no_noise_points{false};
  bool no_foreground_points{false};
  std::size_t true_positive{0};
  std::size_t false_positive{0};
  std::size_t true_negative{0};
  std::size_t false_negative{0};
};

/// Metrics of a keep/drop partition against ground-truth labels. Kept points
/// count as predicted foreground. Without noise points the denoise rate is 100
/// and `no_noise_points` is set (likewise for recall without foreground).
DenoiseMetrics denoise_metrics(
  std::span<const std::size_t> kept, std::span<const std::optional<bool>> labels);

/// Sums confusion counts of several frames and recomputes the percentages.
DenoiseMetrics pooled(std::span<const DenoiseMetrics> frames);

/// Area under the ROC curve of scores against labels (ties count half).
double roc_auc(std::span<const double> scores, std::span<const std::optional<bool>> labels);

struct FadTrainOptions
{
  int epochs{10};
  int batch_size{4};
  double lr{1e-3};
  std::uint64_t seed{0};
};

/// Standalone training on labelled radar frames with Adam; returns the mean
/// loss of every epoch. Frame order is shuffled per epoch from `seed`.
std::vector<double> train_fad(
  FadModel & model, std::span<const pointcloud::RadarCloud> frames,
  const FadTrainOptions & options,
  const std::function<void(int epoch, double loss)> & on_epoch = {});

}  // namespace fusionlab::fad

#endif  // FUSIONLAB__FAD_HPP_
