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

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "fusionlab/error.hpp"
#include "fusionlab/nn.hpp"
#include "fusionlab/ops.hpp"
#include "fusionlab/optim.hpp"

namespace
{

using namespace fusionlab;
using tensor::Tape;
using tensor::Tensor;

TEST(NnTest, LayerParameterCounts)
{
  std::mt19937_64 rng(0);
  nn::StateList s;
  nn::Linear(5, 3, rng).collect("lin", s);
  nn::Conv2d(4, 6, 3, 2, rng, false).collect("conv", s);
  nn::BatchNorm2d(6).collect("bn", s);
  // 5*3+3, 4*6*9, gamma+beta trainable; running stats are buffers.
  EXPECT_EQ(nn::parameter_count(s), 18u + 216u + 12u);
  EXPECT_EQ(s.size(), 2u + 1u + 4u);
  EXPECT_EQ(nn::trainable(s).size(), 5u);
}

TEST(NnTest, KaimingUniformRespectsBound)
{
  std::mt19937_64 rng(1);
  Tensor t = Tensor::zeros({1000});
  nn::kaiming_uniform(t, 24, rng);
  const double bound = std::sqrt(6.0 / 24.0);
  double lo = 0.0;
  double hi = 0.0;
  for (double v : t.data()) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  EXPECT_GE(lo, -bound);
  EXPECT_LE(hi, bound);
  EXPECT_LT(lo, -0.9 * bound);
  EXPECT_GT(hi, 0.9 * bound);
}

TEST(NnTest, ConvBlockHalvesResolutionWithStrideTwo)
{
  std::mt19937_64 rng(2);
  nn::ConvBlock block(3, 5, 2, rng);
  auto tape = Tape::inference();
  const Tensor y = block.forward(tape, Tensor::full({3, 9, 8}, 0.5), true);
  EXPECT_EQ(y.shape(), (tensor::Shape{5, 5, 4}));
  for (double v : y.data()) {
    EXPECT_GE(v, 0.0);
  }
}

TEST(NnTest, LoadStateChecksNamesAndShapes)
{
  Tensor a = Tensor::zeros({2});
  const nn::StateList target{{"a", a, true}};
  EXPECT_THROW(nn::load_state(target, {{"b", Tensor::zeros({2}), true}}), Error);
  EXPECT_THROW(nn::load_state(target, {{"a", Tensor::zeros({3}), true}}), ShapeError);
  nn::load_state(target, {{"a", Tensor::from({2}, {4.0, 5.0}), true}});
  EXPECT_DOUBLE_EQ(a.at(1), 5.0);
}

TEST(AdamTest, FirstTwoStepsMatchHandComputation)
{
  Tensor w = Tensor::from({2}, {1.0, -2.0}, true);
  optim::AdamOptions opt;
  opt.lr = 0.1;
  optim::Adam adam({{"w", w, true}}, opt);

  // Step 1: loss = sum(w^2) -> g = 2w. m = 0.1 g, v = 0.001 g^2, bias-corrected
  // m_hat = g, v_hat = g^2: the update is lr * g / (|g| + eps).
  const auto step = [&]() {
    adam.zero_grad();
    Tape tape;
    tape.backward(tensor::sum(tape, tensor::mul(tape, w, w)));
    adam.step();
  };
  step();
  const double g0 = 2.0;
  const double g1 = -4.0;
  double w0 = 1.0 - 0.1 * g0 / (std::abs(g0) + 1e-8);
  double w1 = -2.0 - 0.1 * g1 / (std::abs(g1) + 1e-8);
  EXPECT_NEAR(w.at(0), w0, 1e-15);
  EXPECT_NEAR(w.at(1), w1, 1e-15);

  // Step 2 from the recurrences.
  const double h0 = 2.0 * w0;
  const double h1 = 2.0 * w1;
  const double m0 = 0.9 * 0.1 * g0 + 0.1 * h0;
  const double m1 = 0.9 * 0.1 * g1 + 0.1 * h1;
  const double v0 = 0.999 * 0.001 * g0 * g0 + 0.001 * h0 * h0;
  const double v1 = 0.999 * 0.001 * g1 * g1 + 0.001 * h1 * h1;
  const double c1 = 1.0 - 0.9 * 0.9;
  const double c2 = 1.0 - 0.999 * 0.999;
  step();
  w0 -= 0.1 * (m0 / c1) / (std::sqrt(v0 / c2) + 1e-8);
  w1 -= 0.1 * (m1 / c1) / (std::sqrt(v1 / c2) + 1e-8);
  EXPECT_NEAR(w.at(0), w0, 1e-14);
  EXPECT_NEAR(w.at(1), w1, 1e-14);
  EXPECT_EQ(adam.steps(), 2u);
}

TEST(AdamTest, ParametersWithoutGradientsStayPut)
{
  Tensor used = Tensor::from({1}, {1.0}, true);
  Tensor unused = Tensor::from({1}, {3.0}, true);
  optim::Adam adam({{"used", used, true}, {"unused", unused, true}});
  Tape tape;
  tape.backward(tensor::sum(tape, used));
  adam.step();
  EXPECT_NE(used.at(0), 1.0);
  EXPECT_EQ(unused.at(0), 3.0);
}

TEST(AdamTest, StateRestoresTheTrajectory)
{
  auto run = [](int steps_before, bool restore, const nn::StateList * saved) {
    Tensor w = Tensor::from({3}, {0.5, -1.0, 2.0}, true);
    optim::Adam adam({{"w", w, true}});
    if (restore) {
      nn::load_state({{"w", w, true}}, *saved);
      optim::load_optimizer_state(adam, *saved);
    }
    for (int i = 0; i < steps_before; ++i) {
      adam.zero_grad();
      Tape tape;
      tape.backward(tensor::sum(tape, tensor::mul(tape, tensor::sigmoid(tape, w), w)));
      adam.step();
    }
    nn::StateList state = adam.state();
    state.push_back({"w", w.detach(), true});
    return state;
  };
  const auto full = run(6, false, nullptr);
  const auto half = run(3, false, nullptr);
  const auto resumed = run(3, true, &half);
  const auto find = [](const nn::StateList & s, const std::string & name) {
    for (const auto & e : s) {
      if (e.name == name) {
        return e.tensor;
      }
    }
    return Tensor();
  };
  const Tensor a = find(full, "w");
  const Tensor b = find(resumed, "w");
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(a.at(i), b.at(i));  // bitwise
  }
}

}  // namespace
