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

// Micro-benchmarks for the hot kernels: convolution, pillarization and
// rotated IoU.

#include <numbers>
#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "fusionlab/dataset.hpp"
#include "fusionlab/eval.hpp"
#include "fusionlab/mme.hpp"
#include "fusionlab/ops.hpp"
#include "fusionlab/scenegen.hpp"

namespace
{

using namespace fusionlab;
using tensor::Tape;
using tensor::Tensor;

Tensor random_tensor(tensor::Shape shape, std::mt19937_64 & rng, bool requires_grad = false)
{
  std::size_t n = 1;
  for (std::size_t d : shape) {
    n *= d;
  }
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(n);
  for (double & x : v) {
    x = u(rng);
  }
  return Tensor::from(std::move(shape), std::move(v), requires_grad);
}

void BM_Conv2dForward(benchmark::State & state)
{
  const auto c = static_cast<std::size_t>(state.range(0));
  const auto hw = static_cast<std::size_t>(state.range(1));
  std::mt19937_64 rng(1);
  const Tensor x = random_tensor({c, hw, hw}, rng);
  const Tensor w = random_tensor({c, c, 3, 3}, rng);
  const Tensor b = random_tensor({c}, rng);
  for (auto _ : state) {
    auto tape = Tape::inference();
    benchmark::DoNotOptimize(tensor::conv2d(tape, x, w, b, 1, 1));
  }
  state.SetItemsProcessed(static_cast<int64_t>(state.iterations() * c * c * 9 * hw * hw));
}
BENCHMARK(BM_Conv2dForward)->Args({16, 64})->Args({32, 32})->Unit(benchmark::kMillisecond);

void BM_Conv2dBackward(benchmark::State & state)
{
  const auto c = static_cast<std::size_t>(state.range(0));
  const auto hw = static_cast<std::size_t>(state.range(1));
  std::mt19937_64 rng(2);
  const Tensor x = random_tensor({c, hw, hw}, rng, true);
  const Tensor w = random_tensor({c, c, 3, 3}, rng, true);
  const Tensor b = random_tensor({c}, rng, true);
  for (auto _ : state) {
    Tape tape;
    tape.backward(tensor::sum(tape, tensor::conv2d(tape, x, w, b, 1, 1)));
  }
}
BENCHMARK(BM_Conv2dBackward)->Args({16, 64})->Unit(benchmark::kMillisecond);

void BM_PillarizeAndFuse(benchmark::State & state)
{
  scenegen::SceneSpec spec;
  const auto frames = dataset::generate_frames(spec, 1, 3);
  mme::PillarGridSpec grid;
  grid.bounds = spec.bounds;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
      mme::bidirectional_fuse(mme::pillarize(frames[0].lidar, frames[0].radar, grid)));
  }
  state.SetItemsProcessed(
    static_cast<int64_t>(state.iterations() * (frames[0].lidar.size() + frames[0].radar.size())));
}
BENCHMARK(BM_PillarizeAndFuse)->Unit(benchmark::kMicrosecond);

void BM_RotatedIou(benchmark::State & state)
{
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> pos(-2.0, 2.0);
  std::uniform_real_distribution<double> size(0.5, 4.5);
  std::uniform_real_distribution<double> yaw(-std::numbers::pi, std::numbers::pi);
  std::vector<Box3D> boxes;
  for (int i = 0; i < 256; ++i) {
    boxes.push_back(Box3D{pos(rng), pos(rng), 0, size(rng), size(rng), 1.5, yaw(rng), 0, 1});
  }
  const bool three_d = state.range(0) != 0;
  std::size_t i = 0;
  for (auto _ : state) {
    const Box3D & a = boxes[i % boxes.size()];
    const Box3D & b = boxes[(i * 7 + 3) % boxes.size()];
    benchmark::DoNotOptimize(three_d ? eval::iou_3d(a, b) : eval::iou_bev(a, b));
    ++i;
  }
}
BENCHMARK(BM_RotatedIou)->Arg(0)->Arg(1);

}  // namespace
BENCHMARK_MAIN();
