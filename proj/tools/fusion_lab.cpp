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

// fusion-lab: command-line front end of the LiDAR + 4D-radar fusion pipeline.
//
// Exit codes: 0 success, 1 runtime failure (I/O, malformed files, refused
// output directory), 2 invalid configuration or command line. Input paths
// that do not exist are rejected while parsing the command line (2).

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "fusionlab/checkpoint.hpp"
#include "fusionlab/config.hpp"
#include "fusionlab/dataset.hpp"
#include "fusionlab/error.hpp"
#include "fusionlab/eval.hpp"
#include "fusionlab/experiment.hpp"
#include "fusionlab/fad.hpp"
#include "fusionlab/model.hpp"
#include "fusionlab/pointcloud.hpp"

namespace fs = std::filesystem;
using namespace fusionlab;
using ordered_json = nlohmann::ordered_json;

namespace
{

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;

// ---------------------------------------------------------------------------
// Shared helpers

/// Options common to commands that read a configuration.
struct ConfigOptions
{
  std::string path;
  std::vector<std::string> overrides;
};

void add_config_options(CLI::App & cmd, ConfigOptions & opts)
{
  cmd.add_option("--config", opts.path, "TOML configuration file")->check(CLI::ExistingFile);
  cmd.add_option(
    "--set", opts.overrides, "Override a configuration value, e.g. --set train.lr=0.002");
}

config::Config resolve_config(const ConfigOptions & opts, const fs::path & fallback = {})
{
  config::Config cfg;
  if (!opts.path.empty()) {
    cfg = config::load_config(opts.path);
  } else if (!fallback.empty() && fs::exists(fallback)) {
    cfg = config::load_config(fallback);
  }
  return config::apply_overrides(cfg, opts.overrides);
}

/// Refuses a non-empty output directory unless forced; with --force the
/// directory's previous contents are removed.
void prepare_out_dir(const fs::path & dir, bool force)
{
  if (fs::exists(dir)) {
    if (!fs::is_directory(dir)) {
      throw Error("output '" + dir.string() + "' exists and is not a directory");
    }
    if (!fs::is_empty(dir)) {
      if (!force) {
        throw Error("output directory '" + dir.string() + "' is not empty (use --force)");
      }
      for (const auto & entry : fs::directory_iterator(dir)) {
        fs::remove_all(entry.path());
      }
    }
  }
  fs::create_directories(dir);
}

/// Refuses an existing output file unless forced.
void prepare_out_file(const fs::path & file, bool force)
{
  if (fs::exists(file) && !force) {
    throw Error("output file '" + file.string() + "' exists (use --force)");
  }
  if (file.has_parent_path()) {
    fs::create_directories(file.parent_path());
  }
}

void write_text(const fs::path & path, const std::string & text)
{
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw Error("cannot open '" + path.string() + "' for writing");
  }
  out << text;
  if (!out) {
    throw Error("failed writing '" + path.string() + "'");
  }
}

/// Configuration stored next to a checkpoint by `train`: <run>/config.toml
/// for <run>/checkpoints/epoch_NNN.ckpt.
fs::path run_config_of(const fs::path & checkpoint)
{
  return checkpoint.parent_path().parent_path() / "config.toml";
}

std::vector<dataset::FrameBoxes> to_frame_boxes(
  std::span<const eval::FrameResult> results, bool detections)
{
  std::vector<dataset::FrameBoxes> out;
  out.reserve(results.size());
  for (const auto & r : results) {
    out.push_back({r.frame_id, r.weather, detections ? r.detections : r.ground_truth});
  }
  return out;
}

std::vector<double> parse_taus(const std::vector<std::string> & items)
{
  std::vector<double> taus;
  for (const auto & item : items) {
    std::stringstream ss(item);
    std::string token;
    while (std::getline(ss, token, ',')) {
      if (token.empty()) {
        continue;
      }
      try {
        std::size_t used = 0;
        const double tau = std::stod(token, &used);
        if (used != token.size() || !(tau >= 0.0 && tau <= 1.0)) {
          throw std::invalid_argument(token);
        }
        taus.push_back(tau);
      } catch (const std::logic_error &) {
        throw ConfigError("--tau", "expected thresholds in [0, 1], got '" + token + "'");
      }
    }
  }
  if (taus.empty()) {
    throw ConfigError("--tau", "at least one threshold is required");
  }
  return taus;
}

std::vector<int> parse_levels(const std::string & text)
{
  std::vector<int> levels;
  std::stringstream ss(text);
  std::string token;
  while (std::getline(ss, token, ',')) {
    try {
      std::size_t used = 0;
      const int level = std::stoi(token, &used);
      if (used != token.size() || level < 0 || level > 4) {
        throw std::invalid_argument(token);
      }
      levels.push_back(level);
    } catch (const std::logic_error &) {
      throw ConfigError("--levels", "expected fog levels 0..4, got '" + token + "'");
    }
  }
  if (levels.empty()) {
    throw ConfigError("--levels", "at least one fog level is required");
  }
  return levels;
}

/// Loads the denoising network from any checkpoint holding "fad.*" tensors
/// (a `denoise` model or a full detector trained with denoising).
fad::FadModel load_fad(const fs::path & path, const fad::FadConfig & cfg)
{
  std::mt19937_64 rng(0);
  fad::FadModel fad_model(cfg, rng);
  nn::StateList target;
  fad_model.collect("fad", target);
  nn::load_state(target, checkpoint::read(path));
  return fad_model;
}

// ---------------------------------------------------------------------------
// gen

struct GenOptions
{
  ConfigOptions config;
  std::string spec;
  std::size_t frames{200};
  std::optional<std::uint64_t> seed;
  std::size_t first{0};
  std::string out;
  bool force{false};
};

int run_gen(const GenOptions & o)
{
  ConfigOptions co = o.config;
  if (!o.spec.empty()) {
    co.path = o.spec;
  }
  const auto cfg = resolve_config(co);
  const std::uint64_t seed = o.seed.value_or(cfg.scene.seed);
  prepare_out_dir(o.out, o.force);
  const auto frames = dataset::generate_frames(cfg.scene, o.frames, seed, o.first);
  dataset::write_dataset(o.out, frames);
  std::size_t boxes = 0;
  for (const auto & f : frames) {
    boxes += f.gt.size();
  }
  std::cout << "wrote " << frames.size() << " frames (" << boxes << " boxes) to " << o.out
            << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// fog

struct FogOptions
{
  ConfigOptions config;
  std::string data;
  int level{0};
  std::uint64_t seed{0};
  std::string out;
  bool force{false};
};

int run_fog(const FogOptions & o)
{
  const auto cfg = resolve_config(o.config);
  const auto frames = dataset::read_dataset(o.data);
  prepare_out_dir(o.out, o.force);
  const auto fogged = dataset::with_fog(frames, o.level, o.seed, cfg.fog);
  dataset::write_dataset(o.out, fogged);
  std::size_t before = 0;
  std::size_t after = 0;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    before += frames[i].lidar.size();
    after += fogged[i].lidar.size();
  }
  std::cout << "fog level " << o.level << " (" << eval::weather_tag(o.level) << "): " << before
            << " -> " << after << " LiDAR points over " << frames.size() << " frames\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// denoise

struct DenoiseOptions
{
  ConfigOptions config;
  std::string data;
  std::string model;
  std::optional<int> epochs;
  std::optional<double> tau;
  std::string out;
  bool force{false};
};

ordered_json metrics_json(const fad::DenoiseMetrics & m)
{
  ordered_json j;
  j["denoise_rate"] = m.denoise_rate;
  j["recall"] = m.recall;
  j["miou"] = m.miou;
  j["pa"] = m.pa;
  j["tp"] = m.true_positive;
  j["fp"] = m.false_positive;
  j["tn"] = m.true_negative;
  j["fn"] = m.false_negative;
  return j;
}

int run_denoise(const DenoiseOptions & o)
{
  auto cfg = resolve_config(o.config);
  if (o.tau) {
    cfg.model.fad.tau_infer = *o.tau;
  }
  if (o.epochs) {
    cfg.train.epochs = *o.epochs;
  }
  cfg.validate();
  auto frames = dataset::read_dataset(o.data);
  prepare_out_dir(o.out, o.force);

  fad::FadModel fad_model;
  if (!o.model.empty()) {
    fad_model = load_fad(o.model, cfg.model.fad);
  } else {
    std::mt19937_64 rng(cfg.model.init_seed);
    fad_model = fad::FadModel(cfg.model.fad, rng);
    std::vector<pointcloud::RadarCloud> radar;
    radar.reserve(frames.size());
    for (const auto & f : frames) {
      radar.push_back(f.radar);
    }
    fad::FadTrainOptions topts;
    topts.epochs = cfg.train.epochs;
    topts.batch_size = cfg.train.batch_size;
    topts.lr = cfg.train.lr;
    topts.seed = cfg.train.seed;
    fad::train_fad(fad_model, radar, topts, [](int epoch, double loss) {
      std::cout << "epoch " << epoch + 1 << " loss " << loss << "\n";
    });
    nn::StateList state;
    fad_model.collect("fad", state);
    checkpoint::save(fs::path(o.out) / "fad.ckpt", state);
  }

  const double tau = cfg.model.fad.tau_infer;
  std::vector<fad::DenoiseMetrics> per_frame;
  bool labelled = true;
  for (auto & f : frames) {
    const auto scores = fad::score_points(fad_model, f.radar);
    const auto kept = fad::kept_indices(scores, tau);
    const auto labels = pointcloud::labels_of(f.radar);
    for (const auto & l : labels) {
      labelled = labelled && l.has_value();
    }
    if (labelled) {
      per_frame.push_back(fad::denoise_metrics(kept, labels));
    }
    f.radar = fad::filter_foreground(f.radar, scores, tau);
  }
  dataset::write_dataset(o.out, frames);

  ordered_json report;
  report["tau"] = tau;
  report["frames"] = frames.size();
  if (labelled) {
    const auto m = fad::pooled(per_frame);
    report["metrics"] = metrics_json(m);
    std::cout << "tau " << tau << ": denoise rate " << m.denoise_rate << "%, recall " << m.recall
              << "%, mIoU " << m.miou << "%, PA " << m.pa << "%\n";
  } else {
    report["metrics"] = nullptr;
    std::cout << "tau " << tau << ": radar labels absent, metrics skipped\n";
  }
  write_text(fs::path(o.out) / "denoise.json", report.dump(2) + "\n");
  return kExitOk;
}

// ---------------------------------------------------------------------------
// train

struct TrainCliOptions
{
  ConfigOptions config;
  std::string data;
  std::optional<std::string> fusion_mode;
  std::optional<int> epochs;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string resume;
  bool force{false};
};

int run_train(const TrainCliOptions & o)
{
  fs::path out = o.out;
  if (out.empty()) {
    if (o.resume.empty()) {
      throw ConfigError("--out", "an output directory is required");
    }
    out = fs::path(o.resume).parent_path().parent_path();
  }
  auto cfg = resolve_config(o.config, o.resume.empty() ? fs::path{} : run_config_of(o.resume));
  if (o.fusion_mode) {
    cfg.model.backbone.fusion_mode =
      backbone::parse_fusion_mode(*o.fusion_mode, "backbone.fusion_mode");
  }
  if (o.epochs) {
    cfg.train.epochs = *o.epochs;
  }
  if (o.seed) {
    cfg.train.seed = *o.seed;
    cfg.model.init_seed = *o.seed;
  }
  cfg.validate();
  const auto frames = dataset::read_dataset(o.data);

  experiment::TrainOptions topts;
  topts.out_dir = out;
  topts.data_source = fs::absolute(o.data).string();
  if (o.resume.empty()) {
    prepare_out_dir(out, o.force);
  } else {
    topts.resume = fs::path(o.resume);
    fs::create_directories(out);
  }
  write_text(out / "config.toml", config::to_toml(cfg));

  model::L4drModel model(cfg.model);
  topts.on_batch = [&](const experiment::LossRow & row) {
    if (row.batch == 1) {
      std::cout << "epoch " << row.epoch << "/" << cfg.train.epochs << " loss " << row.total
                << "\n";
    }
  };
  const auto result = experiment::train(model, cfg, frames, topts);
  std::cout << "trained " << result.epochs_completed << " epochs, " << result.rows.size()
            << " batches; config hash " << config::config_hash(cfg) << "; run in " << out.string()
            << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// infer

struct InferOptions
{
  ConfigOptions config;
  std::string model;
  std::string data;
  std::optional<int> level;
  std::uint64_t fog_seed{0};
  std::optional<double> tau;
  std::string out;
  bool force{false};
};

model::L4drModel load_detector(
  const ConfigOptions & co, const fs::path & checkpoint_path, std::optional<double> tau,
  config::Config & cfg)
{
  cfg = resolve_config(co, run_config_of(checkpoint_path));
  if (tau) {
    cfg.model.fad.tau_infer = *tau;
  }
  cfg.validate();
  model::L4drModel model(cfg.model);
  experiment::load_model(checkpoint_path, model);
  return model;
}

int run_infer(const InferOptions & o)
{
  config::Config cfg;
  auto model = load_detector(o.config, o.model, o.tau, cfg);
  auto frames = dataset::read_dataset(o.data);
  if (o.level) {
    frames = dataset::with_fog(frames, *o.level, o.fog_seed, cfg.fog);
  }
  prepare_out_file(o.out, o.force);
  const auto results =
    experiment::infer(model, frames, experiment::worker_threads(cfg.train.threads));
  dataset::write_boxes_jsonl(o.out, to_frame_boxes(results, true));
  std::size_t n = 0;
  for (const auto & r : results) {
    n += r.detections.size();
  }
  std::cout << "wrote " << n << " detections for " << results.size() << " frames to " << o.out
            << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// eval

struct EvalOptions
{
  ConfigOptions config;
  std::string dets;
  std::string gt;
  std::string report;
  bool force{false};
};

int run_eval(const EvalOptions & o)
{
  const auto cfg = resolve_config(o.config);
  const auto gts = dataset::read_boxes_jsonl(o.gt);
  const auto dets = dataset::read_boxes_jsonl(o.dets);
  std::map<std::string, const dataset::FrameBoxes *> by_id;
  for (const auto & d : dets) {
    by_id[d.id] = &d;
  }
  std::vector<eval::FrameResult> results;
  results.reserve(gts.size());
  for (const auto & g : gts) {
    eval::FrameResult r;
    r.frame_id = g.id;
    r.weather = g.weather;
    r.ground_truth = g.boxes;
    if (auto it = by_id.find(g.id); it != by_id.end()) {
      r.detections = it->second->boxes;
      by_id.erase(it);
    }
    results.push_back(std::move(r));
  }
  if (!by_id.empty()) {
    throw FormatError(
      o.dets + ": detections for frame '" + by_id.begin()->first + "' which has no ground truth");
  }
  const auto report = eval::weather_report(results, cfg.eval);
  std::cout << report.to_text();
  if (!o.report.empty()) {
    prepare_out_file(o.report, o.force);
    write_text(o.report, report.to_json());
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// sweep

struct SweepOptions
{
  ConfigOptions config;
  std::string model;
  std::string data;
  std::vector<std::string> taus{"0.1,0.2,0.3,0.5"};
  bool detector{true};
  std::string out;
  bool force{false};
};

int run_sweep(const SweepOptions & o)
{
  const auto taus = parse_taus(o.taus);
  config::Config cfg = resolve_config(o.config, run_config_of(o.model));
  cfg.validate();
  const auto frames = dataset::read_dataset(o.data);
  const auto fad_model = load_fad(o.model, cfg.model.fad);
  std::optional<model::L4drModel> detector;
  if (o.detector && cfg.model.toggles.fad && cfg.model.toggles.radar) {
    detector.emplace(cfg.model);
    const nn::StateList saved = checkpoint::read(o.model);
    bool complete = true;
    for (const auto & entry : detector->state()) {
      bool found = false;
      for (const auto & s : saved) {
        found = found || s.name == entry.name;
      }
      complete = complete && found;
    }
    if (complete) {
      nn::load_state(detector->state(), saved);
    } else {
      detector.reset();  // a standalone denoising checkpoint: no downstream mAP
    }
  }
  const auto rows = experiment::sweep_tau(
    fad_model, frames, taus, detector ? &*detector : nullptr, cfg.eval,
    experiment::worker_threads(cfg.train.threads));
  const std::string csv = experiment::sweep_csv(rows);
  std::cout << csv;
  if (!o.out.empty()) {
    prepare_out_file(o.out, o.force);
    write_text(o.out, csv);
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// stats

struct StatsOptions
{
  std::string data;
  double bin_width{5.0};
  std::string out;
  bool force{false};
};

int run_stats(const StatsOptions & o)
{
  if (!(o.bin_width > 0.0)) {
    throw ConfigError("--bin-width", "must be positive");
  }
  const auto frames = dataset::read_dataset(o.data);
  // weather -> modality -> summed histogram; weathers in first-appearance order.
  std::vector<std::string> order;
  std::map<std::string, std::map<std::string, std::vector<std::size_t>>> hist;
  std::map<std::string, std::size_t> frame_count;
  auto add = [](std::vector<std::size_t> & acc, const std::vector<std::size_t> & h) {
    if (acc.size() < h.size()) {
      acc.resize(h.size(), 0);
    }
    for (std::size_t k = 0; k < h.size(); ++k) {
      acc[k] += h[k];
    }
  };
  for (const auto & f : frames) {
    if (!hist.contains(f.weather)) {
      order.push_back(f.weather);
    }
    add(hist[f.weather]["lidar"], pointcloud::range_histogram(f.lidar, o.bin_width));
    add(hist[f.weather]["radar"], pointcloud::range_histogram(f.radar, o.bin_width));
    ++frame_count[f.weather];
  }
  std::ostringstream csv;
  csv << "weather,modality,range_min,range_max,points,points_per_frame\n";
  char buf[64];
  for (const auto & weather : order) {
    for (const char * modality : {"lidar", "radar"}) {
      const auto & h = hist[weather][modality];
      for (std::size_t k = 0; k < h.size(); ++k) {
        const double per_frame =
          static_cast<double>(h[k]) / static_cast<double>(frame_count[weather]);
        std::snprintf(buf, sizeof(buf), "%.6g", per_frame);
        csv << weather << ',' << modality << ',' << static_cast<double>(k) * o.bin_width << ','
            << static_cast<double>(k + 1) * o.bin_width << ',' << h[k] << ',' << buf << '\n';
      }
    }
  }
  std::cout << csv.str();
  if (!o.out.empty()) {
    prepare_out_file(o.out, o.force);
    write_text(o.out, csv.str());
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// ablate

struct AblateOptions
{
  ConfigOptions config;
  std::string data;
  std::string eval_data;
  std::vector<std::string> rows;
  std::string levels{"0,1,2,3,4"};
  std::uint64_t fog_seed{0};
  std::optional<int> epochs;
  std::string out;
  bool force{false};
};

int run_ablate(const AblateOptions & o)
{
  auto cfg = resolve_config(o.config);
  if (o.epochs) {
    cfg.train.epochs = *o.epochs;
  }
  cfg.validate();
  std::vector<std::set<std::string>> rows;
  const std::vector<std::string> row_text =
    o.rows.empty()
      ? std::vector<std::string>{"lidar_only", "mme", "mme,fad", "mme,fad,im2", "mme,fad,im2,msgf"}
      : o.rows;
  for (const auto & r : row_text) {
    rows.push_back(experiment::parse_components(r));
  }
  const auto levels = parse_levels(o.levels);
  const auto train_frames = dataset::read_dataset(o.data);
  const auto eval_frames =
    o.eval_data.empty() ? train_frames : dataset::read_dataset(o.eval_data);
  if (!o.out.empty()) {
    prepare_out_dir(o.out, o.force);
  }
  const auto result = experiment::ablate(
    cfg, rows, train_frames, eval_frames, levels, o.fog_seed,
    experiment::worker_threads(cfg.train.threads));
  std::cout << result.to_text();
  if (!o.out.empty()) {
    write_text(fs::path(o.out) / "ablation.txt", result.to_text());
    write_text(fs::path(o.out) / "ablation.json", result.to_json());
    write_text(fs::path(o.out) / "config.toml", config::to_toml(cfg));
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char ** argv)
{
  CLI::App app{"fusion-lab: LiDAR + 4D radar fusion detection on synthetic scenes", "fusion-lab"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "fusion-lab 0.1.0");

  GenOptions gen;
  auto * gen_cmd = app.add_subcommand("gen", "Generate a synthetic dataset");
  add_config_options(*gen_cmd, gen.config);
  gen_cmd->add_option("--spec", gen.spec, "Scene specification (a config file; [scene] is used)")
    ->check(CLI::ExistingFile);
  gen_cmd->add_option("--frames", gen.frames, "Number of frames")->capture_default_str();
  gen_cmd->add_option("--seed", gen.seed, "Base seed (default: scene.seed)");
  gen_cmd->add_option("--first", gen.first, "Index of the first frame")->capture_default_str();
  gen_cmd->add_option("--out", gen.out, "Output dataset directory")->required();
  gen_cmd->add_flag("--force", gen.force, "Replace a non-empty output directory");

  FogOptions fog;
  auto * fog_cmd = app.add_subcommand("fog", "Apply simulated fog to a dataset's LiDAR");
  add_config_options(*fog_cmd, fog.config);
  fog_cmd->add_option("--data", fog.data, "Input dataset directory")
    ->required()
    ->check(CLI::ExistingDirectory);
  fog_cmd->add_option("--level", fog.level, "Fog level 0..4")
    ->required()
    ->check(CLI::Range(0, 4));
  fog_cmd->add_option("--seed", fog.seed, "Fog seed")->capture_default_str();
  fog_cmd->add_option("--out", fog.out, "Output dataset directory")->required();
  fog_cmd->add_flag("--force", fog.force, "Replace a non-empty output directory");

  DenoiseOptions den;
  auto * den_cmd =
    app.add_subcommand("denoise", "Filter radar noise (training the scorer when no model is given)");
  add_config_options(*den_cmd, den.config);
  den_cmd->add_option("--data", den.data, "Input dataset directory")
    ->required()
    ->check(CLI::ExistingDirectory);
  den_cmd->add_option("--model", den.model, "Checkpoint with fad.* tensors")
    ->check(CLI::ExistingFile);
  den_cmd->add_option("--epochs", den.epochs, "Training epochs when no model is given");
  den_cmd->add_option("--tau", den.tau, "Keep threshold (default: fad.tau_infer)");
  den_cmd->add_option("--out", den.out, "Output dataset directory")->required();
  den_cmd->add_flag("--force", den.force, "Replace a non-empty output directory");

  TrainCliOptions tr;
  auto * tr_cmd = app.add_subcommand("train", "Train the detector");
  add_config_options(*tr_cmd, tr.config);
  tr_cmd->add_option("--data", tr.data, "Training dataset directory")
    ->required()
    ->check(CLI::ExistingDirectory);
  tr_cmd->add_option("--fusion-mode", tr.fusion_mode, "msgf, im2 or concat_only");
  tr_cmd->add_option("--epochs", tr.epochs, "Total number of epochs");
  tr_cmd->add_option("--seed", tr.seed, "Sets train.seed and model.init_seed");
  tr_cmd->add_option("--out", tr.out, "Run directory");
  tr_cmd->add_option("--resume", tr.resume, "Checkpoint to continue from")
    ->check(CLI::ExistingFile);
  tr_cmd->add_flag("--force", tr.force, "Replace a non-empty run directory");

  InferOptions inf;
  auto * inf_cmd = app.add_subcommand("infer", "Run a trained detector over a dataset");
  add_config_options(*inf_cmd, inf.config);
  inf_cmd->add_option("--model", inf.model, "Detector checkpoint")
    ->required()
    ->check(CLI::ExistingFile);
  inf_cmd->add_option("--data", inf.data, "Dataset directory")
    ->required()
    ->check(CLI::ExistingDirectory);
  inf_cmd->add_option("--level", inf.level, "Fog the LiDAR at this level first")
    ->check(CLI::Range(0, 4));
  inf_cmd->add_option("--fog-seed", inf.fog_seed, "Seed for --level")->capture_default_str();
  inf_cmd->add_option("--tau", inf.tau, "Denoising threshold (default: fad.tau_infer)");
  inf_cmd->add_option("--out", inf.out, "Detections JSON-lines file")->required();
  inf_cmd->add_flag("--force", inf.force, "Overwrite an existing output file");

  EvalOptions ev;
  auto * ev_cmd = app.add_subcommand("eval", "Per-weather AP of detections against ground truth");
  add_config_options(*ev_cmd, ev.config);
  ev_cmd->add_option("--dets", ev.dets, "Detections JSON-lines file")
    ->required()
    ->check(CLI::ExistingFile);
  ev_cmd->add_option("--gt", ev.gt, "Ground-truth JSON-lines file")
    ->required()
    ->check(CLI::ExistingFile);
  ev_cmd->add_option("--report", ev.report, "Write the report as JSON");
  ev_cmd->add_flag("--force", ev.force, "Overwrite an existing report");

  SweepOptions sw;
  auto * sw_cmd = app.add_subcommand("sweep", "Denoising metrics across keep thresholds");
  add_config_options(*sw_cmd, sw.config);
  sw_cmd->add_option("--model", sw.model, "Checkpoint with fad.* tensors")
    ->required()
    ->check(CLI::ExistingFile);
  sw_cmd->add_option("--data", sw.data, "Dataset directory")
    ->required()
    ->check(CLI::ExistingDirectory);
  sw_cmd->add_option("--tau", sw.taus, "Thresholds, comma-separated or repeated")
    ->capture_default_str();
  sw_cmd->add_flag("!--no-detector", sw.detector, "Skip the downstream mAP column");
  sw_cmd->add_option("--out", sw.out, "CSV output file");
  sw_cmd->add_flag("--force", sw.force, "Overwrite an existing output file");

  StatsOptions st;
  auto * st_cmd = app.add_subcommand("stats", "Point-range histograms per weather tag");
  st_cmd->add_option("--data", st.data, "Dataset directory")
    ->required()
    ->check(CLI::ExistingDirectory);
  st_cmd->add_option("--bin-width", st.bin_width, "Range bin width [m]")->capture_default_str();
  st_cmd->add_option("--out", st.out, "CSV output file");
  st_cmd->add_flag("--force", st.force, "Overwrite an existing output file");

  AblateOptions ab;
  auto * ab_cmd = app.add_subcommand("ablate", "Train and evaluate component ablation rows");
  add_config_options(*ab_cmd, ab.config);
  ab_cmd->add_option("--data", ab.data, "Training dataset directory")
    ->required()
    ->check(CLI::ExistingDirectory);
  ab_cmd->add_option("--eval-data", ab.eval_data, "Evaluation dataset (default: --data)")
    ->check(CLI::ExistingDirectory);
  ab_cmd->add_option(
    "--row", ab.rows, "Component set such as mme,fad,im2 or lidar_only (repeatable)");
  ab_cmd->add_option("--levels", ab.levels, "Fog levels, comma-separated")->capture_default_str();
  ab_cmd->add_option("--fog-seed", ab.fog_seed, "Seed of the evaluation fog")
    ->capture_default_str();
  ab_cmd->add_option("--epochs", ab.epochs, "Training epochs per row");
  ab_cmd->add_option("--out", ab.out, "Output directory");
  ab_cmd->add_flag("--force", ab.force, "Replace a non-empty output directory");

  experiment::tune_allocator();
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError & e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*gen_cmd) {
      return run_gen(gen);
    }
    if (*fog_cmd) {
      return run_fog(fog);
    }
    if (*den_cmd) {
      return run_denoise(den);
    }
    if (*tr_cmd) {
      return run_train(tr);
    }
    if (*inf_cmd) {
      return run_infer(inf);
    }
    if (*ev_cmd) {
      return run_eval(ev);
    }
    if (*sw_cmd) {
      return run_sweep(sw);
    }
    if (*st_cmd) {
      return run_stats(st);
    }
    if (*ab_cmd) {
      return run_ablate(ab);
    }
  } catch (const ConfigError & e) {
    std::cerr << "fusion-lab: configuration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception & e) {
    std::cerr << "fusion-lab: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitRuntime;
}
