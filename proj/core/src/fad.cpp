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

#include "fusionlab/fad.hpp"

#include <algorithm>
#include <numeric>

#include "fusionlab/error.hpp"
#include "fusionlab/ops.hpp"
#include "fusionlab/optim.hpp"

namespace fusionlab::fad
{

namespace ts = fusionlab::tensor;

void FadConfig::validate() const
{
  if (!(tau_train >= 0.0 && tau_train <= 1.0)) {
    throw ConfigError("fad.tau_train", "must be in [0, 1]");
  }
  if (!(tau_infer >= 0.0 && tau_infer <= 1.0)) {
    throw ConfigError("fad.tau_infer", "must be in [0, 1]");
  }
  if (k_neighbors < 1) {
    throw ConfigError("fad.k_neighbors", "must be >= 1");
  }
  if (hidden_dims.empty() ||
      std::any_of(hidden_dims.begin(), hidden_dims.end(), [](std::size_t d) { return d == 0; }))
  {
    throw ConfigError("fad.hidden_dims", "must be a non-empty list of positive widths");
  }
  if (!(focal_alpha >= 0.0 && focal_alpha <= 1.0)) {
    throw ConfigError("fad.focal_alpha", "must be in [0, 1]");
  }
  if (!(focal_gamma >= 0.0)) {
    throw ConfigError("fad.focal_gamma", "must be >= 0");
  }
}

Tensor point_features(const pointcloud::RadarCloud & cloud)
{
  std::vector<double> data;
  data.reserve(cloud.size() * kPointFeatures);
  for (const auto & p : cloud) {
    data.push_back(p.x / kPlaneScale);
    data.push_back(p.y / kPlaneScale);
    data.push_back(p.z / kHeightScale);
    data.push_back(p.v_r / kVelocityScale);
    data.push_back(p.v_a / kVelocityScale);
    data.push_back(p.rcs / kRcsScale);
  }
  return Tensor::from({cloud.size(), kPointFeatures}, std::move(data));
}

std::vector<std::vector<std::size_t>> nearest_neighbors(
  const pointcloud::RadarCloud & cloud, int k)
{
  const std::size_t n = cloud.size();
  const std::size_t kk = std::min<std::size_t>(static_cast<std::size_t>(std::max(k, 1)), n);
  std::vector<std::vector<std::size_t>> out(n);
  std::vector<std::pair<double, std::size_t>> dist(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double dx = cloud[j].x - cloud[i].x;
      const double dy = cloud[j].y - cloud[i].y;
      const double dz = cloud[j].z - cloud[i].z;
      dist[j] = {dx * dx + dy * dy + dz * dz, j};
    }
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(kk), dist.end());
    out[i].reserve(kk);
    for (std::size_t m = 0; m < kk; ++m) {
      out[i].push_back(dist[m].second);
    }
  }
  return out;
}

FadModel::FadModel(FadConfig config, std::mt19937_64 & rng) : config_(std::move(config))
{
  config_.validate();
  std::size_t in = kPointFeatures;
  for (std::size_t width : config_.hidden_dims) {
    point_mlp.emplace_back(in, width, rng);
    in = width;
  }
  const std::size_t h = config_.hidden_dims.back();
  edge = nn::Linear(h + 3, h, rng);
  head_hidden = nn::Linear(2 * h, h, rng);
  head_out = nn::Linear(h, 1, rng);
}

Tensor FadModel::logits(Tape & tape, const pointcloud::RadarCloud & cloud) const
{
  const std::size_t n = cloud.size();
  if (n == 0) {
    return Tensor::zeros({0, 1});
  }
  Tensor h = point_features(cloud);
  for (const auto & layer : point_mlp) {
    h = ts::relu(tape, layer.forward(tape, h));
  }

  const auto neighbors = nearest_neighbors(cloud, config_.k_neighbors);
  std::vector<std::size_t> gather;
  std::vector<std::size_t> offsets{0};
  std::vector<double> rel;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j : neighbors[i]) {
      gather.push_back(j);
      rel.push_back((cloud[j].x - cloud[i].x) / kOffsetScale);
      rel.push_back((cloud[j].y - cloud[i].y) / kOffsetScale);
      rel.push_back((cloud[j].z - cloud[i].z) / kOffsetScale);
    }
    offsets.push_back(gather.size());
  }
  const Tensor rel_t = Tensor::from({gather.size(), 3}, std::move(rel));
  const Tensor h_j = ts::gather_rows(tape, h, gather);
  const std::vector<Tensor> edge_parts{h_j, rel_t};
  const Tensor e = ts::relu(tape, edge.forward(tape, ts::concat_cols(tape, edge_parts)));
  const Tensor pooled = ts::segment_max(tape, e, offsets);

  const std::vector<Tensor> head_parts{h, pooled};
  const Tensor z = ts::relu(tape, head_hidden.forward(tape, ts::concat_cols(tape, head_parts)));
  return head_out.forward(tape, z);
}

void FadModel::collect(const std::string & prefix, nn::StateList & out) const
{
  for (std::size_t i = 0; i < point_mlp.size(); ++i) {
    point_mlp[i].collect(prefix + ".point" + std::to_string(i), out);
  }
  edge.collect(prefix + ".edge", out);
  head_hidden.collect(prefix + ".head_hidden", out);
  head_out.collect(prefix + ".head_out", out);
}

std::vector<double> score_points(const FadModel & model, const pointcloud::RadarCloud & cloud)
{
  auto tape = Tape::inference();
  const Tensor p = ts::sigmoid(tape, model.logits(tape, cloud));
  return {p.data().begin(), p.data().end()};
}

std::vector<std::size_t> kept_indices(std::span<const double> scores, double tau)
{
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (scores[i] >= tau) {
      out.push_back(i);
    }
  }
  return out;
}

pointcloud::RadarCloud filter_foreground(
  const pointcloud::RadarCloud & cloud, std::span<const double> scores, double tau)
{
  if (scores.size() != cloud.size()) {
    throw ShapeError(
      "filter_foreground: " + std::to_string(scores.size()) + " scores for " +
      std::to_string(cloud.size()) + " points");
  }
  pointcloud::RadarCloud out;
  for (std::size_t i : kept_indices(scores, tau)) {
    out.push_back(cloud[i]);
  }
  return out;
}

std::vector<double> label_targets(std::span<const std::optional<bool>> labels)
{
  std::vector<double> out;
  out.reserve(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!labels[i]) {
      throw FormatError("point " + std::to_string(i) + " has no foreground label");
    }
    out.push_back(*labels[i] ? 1.0 : 0.0);
  }
  return out;
}

namespace
{

void check_aligned(const Tensor & t, std::size_t n)
{
  if (t.numel() != n) {
    throw ShapeError(
      "fad loss: " + std::to_string(t.numel()) + " predictions for " + std::to_string(n) +
      " labels");
  }
}

}  // namespace

Tensor fad_loss(
  Tape & tape, const Tensor & probs, std::span<const std::optional<bool>> labels, double alpha,
  double gamma)
{
  check_aligned(probs, labels.size());
  const auto targets = label_targets(labels);
  if (targets.empty()) {
    return Tensor::scalar(0.0);
  }
  const std::vector<double> weights(targets.size(), 1.0 / static_cast<double>(targets.size()));
  return ts::binary_focal_loss(tape, probs, targets, weights, alpha, gamma);
}

Tensor fad_loss_from_logits(
  Tape & tape, const Tensor & logits, std::span<const std::optional<bool>> labels, double alpha,
  double gamma)
{
  check_aligned(logits, labels.size());
  const auto targets = label_targets(labels);
  if (targets.empty()) {
    return Tensor::scalar(0.0);
  }
  const std::vector<double> weights(targets.size(), 1.0 / static_cast<double>(targets.size()));
  return ts::sigmoid_focal_loss(tape, logits, targets, weights, alpha, gamma);
}

namespace
{

double percent(std::size_t num, std::size_t den, double empty_value)
{
  return den == 0 ? empty_value : 100.0 * static_cast<double>(num) / static_cast<double>(den);
}

void finish(DenoiseMetrics & m)
{
  const std::size_t tp = m.true_positive;
  const std::size_t fp = m.false_positive;
  const std::size_t tn = m.true_negative;
  const std::size_t fn = m.false_negative;
  m.no_noise_points = tn + fp == 0;
  m.no_foreground_points = tp + fn == 0;
  m.denoise_rate = percent(tn, tn + fp, 100.0);
  m.recall = percent(tp, tp + fn, 100.0);
  const double fg_iou = percent(tp, tp + fp + fn, 100.0);
  const double bg_iou = percent(tn, tn + fn + fp, 100.0);
  m.miou = 0.5 * (fg_iou + bg_iou);
  m.pa = percent(tp + tn, tp + tn + fp + fn, 100.0);
}

}  // namespace

DenoiseMetrics denoise_metrics(
  std::span<const std::size_t> kept, std::span<const std::optional<bool>> labels)
{
  const auto targets = label_targets(labels);
  std::vector<bool> keep(targets.size(), false);
  for (std::size_t i : kept) {
    if (i >= targets.size()) {
      throw ShapeError(
        "denoise_metrics: kept index " + std::to_string(i) + " out of range for " +
        std::to_string(targets.size()) + " points");
    }
    keep[i] = true;
  }
  DenoiseMetrics m;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const bool fg = targets[i] > 0.5;
    if (fg) {
      ++(keep[i] ? m.true_positive : m.false_negative);
    } else {
      ++(keep[i] ? m.false_positive : m.true_negative);
    }
  }
  finish(m);
  return m;
}

DenoiseMetrics pooled(std::span<const DenoiseMetrics> frames)
{
  DenoiseMetrics m;
  for (const auto & f : frames) {
    m.true_positive += f.true_positive;
    m.false_positive += f.false_positive;
    m.true_negative += f.true_negative;
    m.false_negative += f.false_negative;
  }
  finish(m);
  return m;
}

double roc_auc(std::span<const double> scores, std::span<const std::optional<bool>> labels)
{
  const auto targets = label_targets(labels);
  if (scores.size() != targets.size()) {
    throw ShapeError("roc_auc: scores and labels differ in length");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] < scores[b];
  });
  // Mann-Whitney U with average ranks for ties.
  double rank_sum = 0.0;
  std::size_t n_pos = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      ++j;
    }
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t m = i; m < j; ++m) {
      if (targets[order[m]] > 0.5) {
        rank_sum += avg_rank;
        ++n_pos;
      }
    }
    i = j;
  }
  const std::size_t n_neg = order.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) {
    return 0.5;
  }
  const double u = rank_sum - 0.5 * static_cast<double>(n_pos) * static_cast<double>(n_pos + 1);
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

std::vector<double> train_fad(
  FadModel & model, std::span<const pointcloud::RadarCloud> frames,
  const FadTrainOptions & options, const std::function<void(int, double)> & on_epoch)
{
  if (options.epochs < 0) {
    throw ConfigError("fad_train.epochs", "must be >= 0");
  }
  if (options.batch_size < 1) {
    throw ConfigError("fad_train.batch_size", "must be >= 1");
  }
  nn::StateList params;
  model.collect("fad", params);
  optim::AdamOptions adam_options;
  adam_options.lr = options.lr;
  optim::Adam adam(params, adam_options);
  std::mt19937_64 rng(options.seed);
  std::vector<std::size_t> order(frames.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> history;
  const auto & cfg = model.config();
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    std::size_t counted = 0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(options.batch_size))
    {
      const std::size_t stop =
        std::min(order.size(), start + static_cast<std::size_t>(options.batch_size));
      adam.zero_grad();
      bool any = false;
      for (std::size_t b = start; b < stop; ++b) {
        const auto & cloud = frames[order[b]];
        if (cloud.empty()) {
          continue;
        }
        Tape tape;
        const Tensor logits = model.logits(tape, cloud);
        const auto labels = pointcloud::labels_of(cloud);
        const Tensor loss = fad_loss_from_logits(
          tape, logits, labels, cfg.focal_alpha, cfg.focal_gamma);
        total += loss.item();
        ++counted;
        tape.backward(ts::scale(tape, loss, 1.0 / static_cast<double>(stop - start)));
        any = true;
      }
      if (any) {
        adam.step();
      }
    }
    const double mean_loss = counted == 0 ? 0.0 : total / static_cast<double>(counted);
    history.push_back(mean_loss);
    if (on_epoch) {
      on_epoch(epoch, mean_loss);
    }
  }
  return history;
}

}  // namespace fusionlab::fad
