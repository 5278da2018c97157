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

#include "fusionlab/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <iomanip>
#include <limits>
#include <mutex>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include <nlohmann/json.hpp>

#include "fusionlab/checkpoint.hpp"
#include "fusionlab/error.hpp"
#include "fusionlab/fogsim.hpp"
#include "fusionlab/ops.hpp"
#include "fusionlab/optim.hpp"
#include "fusionlab/pointcloud.hpp"
#include "fusionlab/random.hpp"

namespace fusionlab::experiment
{

namespace fs = std::filesystem;
namespace ts = fusionlab::tensor;
using nlohmann::ordered_json;
using tensor::Tape;
using tensor::Tensor;

void tune_allocator()
{
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, std::numeric_limits<int>::max());
  mallopt(M_TOP_PAD, 64 << 20);
#endif
}

int worker_threads(int requested)
{
  int n = std::max(1, requested);
  if (const char * env = std::getenv("FUSIONLAB_THREADS")) {
    char * end = nullptr;
    const long cap = std::strtol(env, &end, 10);
    if (end != env && cap >= 1) {
      n = std::min<long>(n, cap);
    }
  }
  return n;
}

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)> & fn)
{
  const auto workers = static_cast<std::size_t>(std::min<std::size_t>(
    static_cast<std::size_t>(worker_threads(threads)), std::max<std::size_t>(n, 1)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) {
      fn(i);
    }
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      while (true) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n) {
          return;
        }
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) {
            error = std::current_exception();
          }
          next.store(n);
        }
      }
    });
  }
  for (auto & t : pool) {
    t.join();
  }
  if (error) {
    std::rethrow_exception(error);
  }
}

std::string loss_csv_header() { return "epoch,batch,frames,total,cls,loc,fad"; }

std::string loss_csv_row(const LossRow & r)
{
  char buf[256];
  std::snprintf(
    buf, sizeof(buf), "%d,%d,%zu,%.17g,%.17g,%.17g,%.17g", r.epoch, r.batch, r.frames, r.total,
    r.cls, r.loc, r.fad);
  return buf;
}

namespace
{

constexpr const char * kEpochTensor = "train.epoch";

std::string epoch_file(int epoch)
{
  char buf[32];
  std::snprintf(buf, sizeof(buf), "epoch_%03d.ckpt", epoch);
  return buf;
}

void write_text(const fs::path & path, const std::string & text)
{
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw Error("cannot open '" + path.string() + "' for writing");
  }
  out << text;
}

void write_manifest(
  const fs::path & path, const config::Config & cfg, const TrainOptions & options,
  std::size_t frames, int epochs_completed)
{
  ordered_json j;
  j["tool"] = "fusion-lab";
  j["version"] = "0.1.0";
  j["config_hash"] = config::config_hash(cfg);
  j["config"] = config::to_toml(cfg);
  j["seed"] = cfg.train.seed;
  j["init_seed"] = cfg.model.init_seed;
  j["data"] = options.data_source;
  j["frames"] = frames;
  j["epochs_completed"] = epochs_completed;
  j["threads"] = 1;
  j["formats"] = {
    {"pointcloud", pointcloud::kFormatVersion}, {"checkpoint", checkpoint::kVersion}};
  std::vector<std::string> ckpts;
  for (int e = 1; e <= epochs_completed; ++e) {
    ckpts.push_back("checkpoints/" + epoch_file(e));
  }
  j["checkpoints"] = ckpts;
  write_text(path, j.dump(2) + "\n");
}

}  // namespace

void save_training_checkpoint(
  const fs::path & path, const model::L4drModel & model, const nn::StateList & extra)
{
  nn::StateList all = model.state();
  all.insert(all.end(), extra.begin(), extra.end());
  checkpoint::save(path, all);
}

void load_model(const fs::path & path, model::L4drModel & model)
{
  checkpoint::load_into(path, model.state());
}

TrainResult train(
  model::L4drModel & model, const config::Config & cfg, std::span<const dataset::Frame> frames,
  const TrainOptions & options)
{
  cfg.validate();
  const auto & tc = cfg.train;
  const nn::StateList params = model.state();
  optim::AdamOptions adam_options;
  adam_options.lr = tc.lr;
  optim::Adam adam(params, adam_options);
  Tensor epoch_counter = Tensor::scalar(0.0);

  int start_epoch = 0;
  if (options.resume) {
    const nn::StateList saved = checkpoint::read(*options.resume);
    nn::load_state(params, saved);
    optim::load_optimizer_state(adam, saved);
    nn::load_state(nn::StateList{{kEpochTensor, epoch_counter, false}}, saved);
    start_epoch = static_cast<int>(std::llround(epoch_counter.item()));
  }

  const bool to_disk = !options.out_dir.empty();
  std::ofstream csv;
  if (to_disk) {
    fs::create_directories(options.out_dir / "checkpoints");
    const fs::path csv_path = options.out_dir / "loss.csv";
    const bool append = options.resume.has_value() && fs::exists(csv_path);
    csv.open(csv_path, append ? std::ios::binary | std::ios::app : std::ios::binary);
    if (!csv) {
      throw Error("cannot open '" + csv_path.string() + "' for writing");
    }
    if (!append) {
      csv << loss_csv_header() << '\n';
    }
  }

  // Targets depend only on the ground truth, which fog leaves untouched.
  std::vector<detect::Targets> targets;
  targets.reserve(frames.size());
  for (const auto & f : frames) {
    targets.push_back(detect::assign_targets(model.anchors(), f.gt));
  }

  fogsim::FogParams fog_base = cfg.fog;
  TrainResult result;
  result.epochs_completed = start_epoch;
  const auto batch = static_cast<std::size_t>(tc.batch_size);
  for (int epoch = start_epoch; epoch < tc.epochs; ++epoch) {
    std::vector<std::size_t> order(frames.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 shuffle_rng(derive_seed(tc.seed, {0x5348, static_cast<std::uint64_t>(epoch)}));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    int batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += batch, ++batch_index) {
      const std::size_t stop = std::min(order.size(), start + batch);
      const double weight = 1.0 / static_cast<double>(stop - start);
      adam.zero_grad();
      LossRow row;
      row.epoch = epoch + 1;
      row.batch = batch_index + 1;
      row.frames = stop - start;
      for (std::size_t b = start; b < stop; ++b) {
        const std::size_t idx = order[b];
        const dataset::Frame & frame = frames[idx];
        const std::uint64_t key = derive_seed(
          tc.seed, {0x464f47, static_cast<std::uint64_t>(epoch), static_cast<std::uint64_t>(idx)});
        const int level = tc.fog_levels[static_cast<std::size_t>(key % tc.fog_levels.size())];
        pointcloud::LidarCloud lidar;
        if (level == 0) {
          lidar = frame.lidar;
        } else {
          auto fog = fog_base;
          fog.alpha = fogsim::kFogLevelAlpha[static_cast<std::size_t>(level)];
          fog.seed = splitmix64(key);
          lidar = fogsim::simulate_fog(frame.lidar, fog);
        }
        Tape tape;
        const auto out = model.forward(tape, lidar, frame.radar, true);
        const auto l = model.losses(tape, out, targets[idx]);
        row.total += weight * l.total.item();
        row.cls += weight * l.cls.item();
        row.loc += weight * l.loc.item();
        row.fad += weight * l.fad.item();
        tape.backward(ts::scale(tape, l.total, weight));
      }
      adam.step();
      result.rows.push_back(row);
      if (to_disk) {
        csv << loss_csv_row(row) << '\n';
      }
      if (options.on_batch) {
        options.on_batch(row);
      }
    }
    epoch_counter.mutable_data()[0] = static_cast<double>(epoch + 1);
    result.epochs_completed = epoch + 1;
    if (to_disk) {
      csv.flush();
      nn::StateList extra = adam.state();
      extra.push_back(nn::NamedTensor{kEpochTensor, epoch_counter, false});
      save_training_checkpoint(
        options.out_dir / "checkpoints" / epoch_file(epoch + 1), model, extra);
      write_manifest(
        options.out_dir / "manifest.json", cfg, options, frames.size(), result.epochs_completed);
    }
  }
  if (to_disk && result.epochs_completed == start_epoch) {
    write_manifest(
      options.out_dir / "manifest.json", cfg, options, frames.size(), result.epochs_completed);
  }
  return result;
}

std::vector<eval::FrameResult> infer(
  model::L4drModel & model, std::span<const dataset::Frame> frames, int threads)
{
  std::vector<eval::FrameResult> out(frames.size());
  parallel_for(frames.size(), threads, [&](std::size_t i) {
    const auto & f = frames[i];
    out[i].frame_id = f.id;
    out[i].weather = f.weather;
    out[i].ground_truth = f.gt;
    out[i].detections = model.detect(f.lidar, f.radar);
  });
  return out;
}

std::vector<dataset::Frame> fog_sweep_frames(
  std::span<const dataset::Frame> frames, std::span<const int> levels, std::uint64_t seed,
  const fogsim::FogParams & base)
{
  std::vector<dataset::Frame> out;
  for (int level : levels) {
    auto fogged = dataset::with_fog(frames, level, seed, base);
    for (auto & f : fogged) {
      f.id = eval::weather_tag(level) + "/" + f.id;
      out.push_back(std::move(f));
    }
  }
  return out;
}

eval::WeatherReport evaluate(
  model::L4drModel & model, std::span<const dataset::Frame> frames, const eval::EvalConfig & cfg,
  int threads)
{
  const auto results = infer(model, frames, threads);
  return eval::weather_report(results, cfg);
}

std::vector<SweepRow> sweep_tau(
  const fad::FadModel & fad_model, std::span<const dataset::Frame> frames,
  std::span<const double> taus, model::L4drModel * detector, const eval::EvalConfig & eval_cfg,
  int threads)
{
  std::vector<std::vector<double>> scores(frames.size());
  parallel_for(frames.size(), threads, [&](std::size_t i) {
    scores[i] = fad::score_points(fad_model, frames[i].radar);
  });
  std::vector<SweepRow> rows;
  for (double tau : taus) {
    if (!(tau >= 0.0 && tau <= 1.0)) {
      throw ConfigError("sweep.taus", "thresholds must be in [0, 1]");
    }
    std::vector<fad::DenoiseMetrics> per_frame;
    per_frame.reserve(frames.size());
    for (std::size_t i = 0; i < frames.size(); ++i) {
      const auto labels = pointcloud::labels_of(frames[i].radar);
      per_frame.push_back(fad::denoise_metrics(fad::kept_indices(scores[i], tau), labels));
    }
    SweepRow row;
    row.tau = tau;
    row.metrics = fad::pooled(per_frame);
    if (detector != nullptr && detector->config().toggles.fad) {
      detector->set_tau_infer(tau);
      const auto results = infer(*detector, frames, threads);
      std::vector<DetectionSet> dets;
      std::vector<DetectionSet> gts;
      for (const auto & r : results) {
        dets.push_back(r.detections);
        gts.push_back(r.ground_truth);
      }
      row.map_3d = eval::mean_ap(dets, gts, eval_cfg, eval::IouKind::box3d);
    }
    rows.push_back(row);
  }
  return rows;
}

std::string sweep_csv(std::span<const SweepRow> rows)
{
  std::ostringstream os;
  os << "tau,denoise_rate,recall,miou,pa,map_3d\n";
  for (const auto & r : rows) {
    char buf[256];
    std::snprintf(
      buf, sizeof(buf), "%.6g,%.4f,%.4f,%.4f,%.4f,", r.tau, r.metrics.denoise_rate,
      r.metrics.recall, r.metrics.miou, r.metrics.pa);
    os << buf;
    if (r.map_3d) {
      std::snprintf(buf, sizeof(buf), "%.4f", *r.map_3d);
      os << buf;
    }
    os << '\n';
  }
  return os.str();
}

std::set<std::string> parse_components(const std::string & text)
{
  std::set<std::string> out;
  if (text.empty() || text == "lidar_only") {
    return out;
  }
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b == std::string::npos) {
      continue;
    }
    const std::string name = item.substr(b, e - b + 1);
    if (!model::component_names().count(name)) {
      throw ConfigError("ablate.rows", "unknown component '" + name + "'");
    }
    out.insert(name);
  }
  return out;
}

AblationResult ablate(
  const config::Config & base, std::span<const std::set<std::string>> rows,
  std::span<const dataset::Frame> train_frames, std::span<const dataset::Frame> eval_frames,
  std::span<const int> levels, std::uint64_t eval_fog_seed, int threads)
{
  // Reject invalid rows before spending time on training.
  for (const auto & r : rows) {
    config::Config c = base;
    model::apply_components(c.model, r);
  }
  AblationResult result;
  result.levels.assign(levels.begin(), levels.end());
  for (const auto & r : rows) {
    config::Config c = base;
    model::apply_components(c.model, r);
    model::L4drModel net(c.model);
    train(net, c, train_frames);
    AblationRow row;
    row.components = r;
    row.label = model::components_label(r);
    for (int level : levels) {
      const auto fogged = dataset::with_fog(eval_frames, level, eval_fog_seed, c.fog);
      const auto results = infer(net, fogged, threads);
      std::vector<DetectionSet> dets;
      std::vector<DetectionSet> gts;
      for (const auto & fr : results) {
        dets.push_back(fr.detections);
        gts.push_back(fr.ground_truth);
      }
      row.map_3d.push_back(eval::mean_ap(dets, gts, c.eval, eval::IouKind::box3d));
    }
    result.rows.push_back(std::move(row));
  }
  return result;
}

std::string AblationResult::to_text() const
{
  std::ostringstream os;
  os << std::left << std::setw(5) << "MME" << std::setw(5) << "FAD" << std::setw(5) << "IM2"
     << std::setw(6) << "MSGF";
  for (int level : levels) {
    os << std::right << std::setw(13) << eval::weather_tag(level);
  }
  os << '\n';
  for (const auto & r : rows) {
    for (const char * name : {"mme", "fad", "im2", "msgf"}) {
      os << std::left << std::setw(std::string(name) == "msgf" ? 6 : 5)
         << (r.components.count(name) ? "x" : ".");
    }
    for (const auto & v : r.map_3d) {
      std::ostringstream cell;
      if (v) {
        cell << std::fixed << std::setprecision(2) << *v;
      } else {
        cell << "-";
      }
      os << std::right << std::setw(13) << cell.str();
    }
    os << '\n';
  }
  return os.str();
}

std::string AblationResult::to_json() const
{
  ordered_json j;
  std::vector<std::string> tags;
  for (int level : levels) {
    tags.push_back(eval::weather_tag(level));
  }
  j["weathers"] = tags;
  j["metric"] = "map_3d";
  auto arr = ordered_json::array();
  for (const auto & r : rows) {
    ordered_json row;
    row["row"] = r.label;
    row["components"] = std::vector<std::string>(r.components.begin(), r.components.end());
    auto values = ordered_json::array();
    for (const auto & v : r.map_3d) {
      values.push_back(v ? ordered_json(*v) : ordered_json(nullptr));
    }
    row["map_3d"] = values;
    arr.push_back(row);
  }
  j["rows"] = arr;
  return j.dump(2);
}

}  // namespace fusionlab::experiment
