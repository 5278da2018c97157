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
#include <vector>

#include <gtest/gtest.h>

#include "fusionlab/backbone.hpp"
#include "fusionlab/error.hpp"
#include "fusionlab/ops.hpp"
#include "oracles.hpp"

namespace
{

using namespace fusionlab;
using backbone::FusionMode;
using tensor::Tape;
using tensor::Tensor;

backbone::BackboneConfig tiny(FusionMode mode)
{
  backbone::BackboneConfig c;
  c.in_channels = 4;
  c.channels = {8, 16};
  c.strides = {1, 2};
  c.fusion_mode = mode;
  return c;
}

std::vector<double> values(const Tensor & t) { return {t.data().begin(), t.data().end()}; }

TEST(BackboneTest, ParameterCountsMatchHandCount)
{
  // Inter fusion 1x1 (2*4 -> 4): 32. Stage blocks (3x3 conv, no bias, + BN
  // affine): 9*4*8 + 2*8 = 304 and 9*8*16 + 2*16 = 1184. Gates (3x3 conv with
  // bias): 9*8*8 + 8 = 584 and 9*16*16 + 16 = 2320.
  const std::size_t fused = 32 + 304 + 1184;
  const std::size_t intra = 2 * (304 + 1184);
  const std::size_t gates = 2 * (584 + 2320);
  const std::vector<std::pair<FusionMode, std::size_t>> cases{
    {FusionMode::concat_only, fused}, {FusionMode::im2, fused + intra},
    {FusionMode::msgf, fused + intra + gates}};
  for (const auto & [mode, expected] : cases) {
    std::mt19937_64 rng(0);
    backbone::Backbone net(tiny(mode), rng);
    nn::StateList state;
    net.collect("backbone", state);
    EXPECT_EQ(nn::parameter_count(state), expected) << backbone::fusion_mode_name(mode);
    EXPECT_EQ(backbone::analytic_parameter_count(tiny(mode)), expected);
  }
}

TEST(BackboneTest, AnalyticCountAgreesForDeeperConfigs)
{
  for (auto mode : {FusionMode::concat_only, FusionMode::im2, FusionMode::msgf}) {
    backbone::BackboneConfig c;
    c.in_channels = 16;
    c.channels = {16, 32, 64};
    c.strides = {1, 2, 2};
    c.fusion_mode = mode;
    std::mt19937_64 rng(1);
    backbone::Backbone net(c, rng);
    nn::StateList state;
    net.collect("backbone", state);
    EXPECT_EQ(nn::parameter_count(state), backbone::analytic_parameter_count(c));
  }
}

TEST(BackboneTest, HeadInputConcatenatesUpsampledStages)
{
  for (auto mode : {FusionMode::concat_only, FusionMode::im2, FusionMode::msgf}) {
    std::mt19937_64 rng(2);
    const auto cfg = tiny(mode);
    backbone::Backbone net(cfg, rng);
    auto tape = Tape::inference();
    const auto out = net.forward(
      tape, fusionlab::testing::random_tensor({4, 8, 8}, rng, -1, 1, false),
      fusionlab::testing::random_tensor({4, 8, 8}, rng, -1, 1, false), false);
    ASSERT_EQ(out.stages.size(), 2u);
    EXPECT_EQ(out.stages[1].f_f.shape(), (tensor::Shape{16, 4, 4}));
    EXPECT_EQ(out.stages[0].f_l.defined(), mode != FusionMode::concat_only);
    EXPECT_EQ(out.head_input.shape(), (tensor::Shape{cfg.output_channels(), 8, 8}));
    EXPECT_EQ(cfg.output_channels(), mode == FusionMode::concat_only ? 24u : 56u);
  }
}

TEST(BackboneTest, GateMultipliesBySigmoidOfConvolution)
{
  std::mt19937_64 rng(3);
  const backbone::Gate gate(3, rng);
  const Tensor f_m = fusionlab::testing::random_tensor({3, 5, 4}, rng, -1, 1, false);
  const Tensor f_f = fusionlab::testing::random_tensor({3, 5, 4}, rng, -1, 1, false);
  auto tape = Tape::inference();
  const auto got = values(gate.forward(tape, f_m, f_f));
  std::size_t ho = 0;
  std::size_t wo = 0;
  const auto conv = fusionlab::testing::loop_conv2d(
    values(f_f), 3, 5, 4, values(gate.conv.weight), 3, 3, values(gate.conv.bias), 1, 1, ho, wo);
  ASSERT_EQ(conv.size(), got.size());
  const auto m = values(f_m);
  for (std::size_t i = 0; i < got.size(); ++i) {
    EXPECT_NEAR(got[i], m[i] / (1.0 + std::exp(-conv[i])), 1e-12);
  }
  EXPECT_THROW(
    gate.forward(tape, f_m, Tensor::zeros({3, 4, 4})), ShapeError);
}

TEST(BackboneTest, GradientsMatchFiniteDifferences)
{
  backbone::BackboneConfig c;
  c.in_channels = 2;
  c.channels = {2, 3};
  c.strides = {1, 2};
  c.fusion_mode = FusionMode::msgf;
  std::mt19937_64 rng(4);
  backbone::Backbone net(c, rng);
  const Tensor f_l = fusionlab::testing::random_tensor({2, 4, 4}, rng);
  const Tensor f_r = fusionlab::testing::random_tensor({2, 4, 4}, rng);
  const Tensor w = fusionlab::testing::random_tensor({c.output_channels(), 4, 4}, rng, -1, 1, false);
  nn::StateList state;
  net.collect("backbone", state);
  auto inputs = nn::trainable(state);
  inputs.push_back(f_l);
  inputs.push_back(f_r);
  const auto check = fusionlab::testing::check_gradients(
    [&](Tape & tape) {
      const auto out = net.forward(tape, f_l, f_r, false);
      return tensor::sum(tape, tensor::mul(tape, out.head_input, w));
    },
    inputs);
  EXPECT_LE(check.max_rel_error, 1e-4) << check.worst;
}

TEST(BackboneTest, ModeNamesRoundTripAndUnknownNamesAreConfigErrors)
{
  for (auto mode : {FusionMode::concat_only, FusionMode::im2, FusionMode::msgf}) {
    EXPECT_EQ(backbone::parse_fusion_mode(backbone::fusion_mode_name(mode)), mode);
  }
  try {
    backbone::parse_fusion_mode("gated");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError & e) {
    EXPECT_EQ(e.field(), "backbone.fusion_mode");
  }
  auto bad = tiny(FusionMode::msgf);
  bad.strides = {1};
  EXPECT_THROW(bad.validate(), ConfigError);
}

}  // namespace
