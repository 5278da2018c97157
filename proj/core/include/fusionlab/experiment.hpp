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

#ifndef FUSIONLAB__EXPERIMENT_HPP_
#define FUSIONLAB__EXPERIMENT_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "fusionlab/config.hpp"
#include "fusionlab/dataset.hpp"
#include "fusionlab/eval.hpp"
#include "fusionlab/fad.hpp"
#include "fusionlab/model.hpp"

// Training, inference, evaluation and the sweep/ablation drivers behind the
// command-line tool.
namespace fusionlab::experiment
{

/// Keeps freed tensor buffers inside the process heap instead of returning
/// them to the kernel after every op (glibc only; a no-op elsewhere). Large
/// short-lived buffers otherwise cost a page-fault storm per training step.
void tune_allocator();

/// Worker count: `requested`, capped by the FUSIONLAB_THREADS environment
/// variable when set; at least 1.
int worker_threads(int requested);

/// Runs fn(0..n-1) on up to `threads` workers; exceptions are rethrown.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)> & fn);

struct LossRow
{
  int epoch{0};
  int batch{0};
  std::size_t frames{0};
  double total{0.0};
  double cls{0.0};
  double loc{0.0};
  double fad{0.0};
};

/// CSV header and row rendering of the training log.
std::string loss_csv_header();
std::string loss_csv_row(const LossRow & row);

struct TrainOptions
{
  /// Run directory receiving loss.csv, checkpoints/epoch_NNN.ckpt and
  /// manifest.json; empty for an in-memory run.
  std::filesystem::path out_dir;
  /// Checkpoint to continue from; its epoch counter decides where to resume.
  std::optional<std::filesystem::path> resume;
  /// Free-form provenance recorded in the manifest (e.g. dataset path).
  std::string data_source;
  std::function<void(const LossRow &)> on_batch;
};

struct TrainResult
{
  std::vector<LossRow> rows;
  int epochs_completed{0};
};

/// Mini-batch training with Adam. Frame order per epoch and the fog
/// augmentation of every (epoch, frame) are derived from cfg.train.seed, so a
/// run is reproducible and resumable bit-for-bit. Gradients of the frames in a
/// batch are averaged before each step.
TrainResult train(
  model::L4drModel & model, const config::Config & cfg, std::span<const dataset::Frame> frames,
  const TrainOptions & options = {});

/// Model tensors plus optimizer and epoch counter, as written per epoch.
void save_training_checkpoint(
  const std::filesystem::path & path, const model::L4drModel & model, const nn::StateList & extra);

/// Loads only the model tensors of a checkpoint written by train().
void load_model(const std::filesystem::path & path, model::L4drModel & model);

/// Detections for every frame (eval mode), frame-parallel.
std::vector<eval::FrameResult> infer(
  model::L4drModel & model, std::span<const dataset::Frame> frames, int threads = 1);

/// Evaluation frames at each fog level, LiDAR fogged with a fixed seed.
std::vector<dataset::Frame> fog_sweep_frames(
  std::span<const dataset::Frame> frames, std::span<const int> levels, std::uint64_t seed,
  const fogsim::FogParams & base = {});

eval::WeatherReport evaluate(
  model::L4drModel & model, std::span<const dataset::Frame> frames, const eval::EvalConfig & cfg,
  int threads = 1);

struct SweepRow
{
  double tau{0.0};
  fad::DenoiseMetrics metrics;
  std::optional<double> map_3d;  // downstream 3D mAP when a detector is supplied
};

/// Denoising metrics (pooled over frames) for each threshold; with a detector
/// that uses denoising, also its 3D mAP at that inference threshold.
std::vector<SweepRow> sweep_tau(
  const fad::FadModel & fad_model, std::span<const dataset::Frame> frames,
  std::span<const double> taus, model::L4drModel * detector = nullptr,
  const eval::EvalConfig & eval_cfg = {}, int threads = 1);

std::string sweep_csv(std::span<const SweepRow> rows);

struct AblationRow
{
  std::set<std::string> components;
  std::string label;
  std::vector<std::optional<double>> map_3d;  // per fog level
};

struct AblationResult
{
  std::vector<int> levels;
  std::vector<AblationRow> rows;
  std::string to_text() const;
  std::string to_json() const;
};

/// Trains every configuration on `train_frames` and reports 3D mAP on
/// `eval_frames` fogged at each level.
AblationResult ablate(
  const config::Config & base, std::span<const std::set<std::string>> rows,
  std::span<const dataset::Frame> train_frames, std::span<const dataset::Frame> eval_frames,
  std::span<const int> levels, std::uint64_t eval_fog_seed, int threads = 1);

/// Parses "mme,fad,im2" (empty or "lidar_only" for the LiDAR-only row).
std::set<std::string> parse_components(const std::string & text);

}  // namespace fusionlab::experiment

#endif  // FUSIONLAB__EXPERIMENT_HPP_
