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

#include "fusionlab/error.hpp"
#include "fusionlab/ops.hpp"
#include "fusionlab/tensor.hpp"
#include "oracles.hpp"

namespace
{

using fusionlab::ShapeError;
using fusionlab::testing::check_gradients;
using fusionlab::testing::random_tensor;
using fusionlab::tensor::Tape;
using fusionlab::tensor::Tensor;
namespace ts = fusionlab::tensor;

constexpr double kGradTolerance = 1e-4;

std::vector<double> values(const Tensor & t) { return {t.data().begin(), t.data().end()}; }

// A fixed random weighting turns any tensor into a scalar whose gradient
// exercises every output element differently.
Tensor weighted_sum(Tape & tape, const Tensor & t, std::uint64_t seed = 99)
{
  std::mt19937_64 rng(seed);
  const Tensor w = random_tensor(t.shape(), rng, -1.0, 1.0, false);
  return ts::sum(tape, ts::mul(tape, t, w));
}

TEST(TensorTest, LeafGradientsAccumulateAcrossBackwardPasses)
{
  Tensor x = Tensor::from({3}, {1.0, 2.0, 3.0}, true);
  for (int pass = 0; pass < 2; ++pass) {
    Tape tape;
    tape.backward(ts::sum(tape, ts::scale(tape, x, 2.0)));
  }
  for (double g : x.grad()) {
    EXPECT_DOUBLE_EQ(g, 4.0);
  }
  x.zero_grad();
  EXPECT_DOUBLE_EQ(x.grad()[0], 0.0);
}

TEST(TensorTest, InferenceTapeRecordsNothing)
{
  Tensor x = Tensor::from({2}, {1.0, -1.0}, true);
  auto tape = Tape::inference();
  const Tensor y = ts::relu(tape, x);
  EXPECT_EQ(tape.size(), 0u);
  EXPECT_FALSE(y.recorded());
  EXPECT_EQ(values(y), (std::vector<double>{1.0, 0.0}));
}

TEST(TensorTest, ConstantsAreNotRecorded)
{
  Tape tape;
  const Tensor a = Tensor::from({2}, {1.0, 2.0});
  const Tensor b = ts::add(tape, a, a);
  EXPECT_EQ(tape.size(), 0u);
  EXPECT_EQ(values(b), (std::vector<double>{2.0, 4.0}));
}

TEST(TensorTest, ShapeMismatchNamesBothShapes)
{
  Tape tape;
  try {
    ts::add(tape, Tensor::zeros({2, 3}), Tensor::zeros({3, 2}));
    FAIL() << "expected ShapeError";
  } catch (const ShapeError & e) {
    EXPECT_NE(std::string(e.what()).find("[2x3]"), std::string::npos) << e.what();
  }
}

TEST(OpsForwardTest, LinearMatchesLoopOracle)
{
  std::mt19937_64 rng(1);
  const Tensor x = random_tensor({5, 7}, rng, -2, 2, false);
  const Tensor w = random_tensor({4, 7}, rng, -2, 2, false);
  const Tensor b = random_tensor({4}, rng, -2, 2, false);
  auto tape = Tape::inference();
  const auto y = values(ts::linear(tape, x, w, b));
  const auto ref = fusionlab::testing::loop_linear(values(x), 5, 7, values(w), 4, values(b));
  ASSERT_EQ(y.size(), ref.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    EXPECT_NEAR(y[i], ref[i], 1e-12);
  }
}

struct ConvCase
{
  std::size_t c_in, h, w, c_out, k;
  int stride, pad;
  bool bias;
};

class ConvOracleTest : public ::testing::TestWithParam<ConvCase>
{
};

TEST_P(ConvOracleTest, MatchesLoopConvolution)
{
  const ConvCase c = GetParam();
  std::mt19937_64 rng(7);
  const Tensor x = random_tensor({c.c_in, c.h, c.w}, rng, -1, 1, false);
  const Tensor w = random_tensor({c.c_out, c.c_in, c.k, c.k}, rng, -1, 1, false);
  const Tensor b = c.bias ? random_tensor({c.c_out}, rng, -1, 1, false) : Tensor();
  auto tape = Tape::inference();
  const Tensor y = ts::conv2d(tape, x, w, b, c.stride, c.pad);
  std::size_t ho = 0;
  std::size_t wo = 0;
  const auto ref = fusionlab::testing::loop_conv2d(
    values(x), c.c_in, c.h, c.w, values(w), c.c_out, c.k, c.bias ? values(b) : std::vector<double>{},
    c.stride, c.pad, ho, wo);
  ASSERT_EQ(y.shape(), (ts::Shape{c.c_out, ho, wo}));
  const auto yv = values(y);
  for (std::size_t i = 0; i < yv.size(); ++i) {
    EXPECT_NEAR(yv[i], ref[i], 1e-12) << "element " << i;
  }
}

INSTANTIATE_TEST_SUITE_P(
  Shapes, ConvOracleTest,
  ::testing::Values(
    ConvCase{3, 6, 5, 4, 3, 1, 1, true}, ConvCase{2, 7, 7, 3, 3, 2, 1, false},
    ConvCase{4, 5, 6, 2, 1, 1, 0, true}, ConvCase{2, 8, 8, 2, 5, 2, 2, true},
    ConvCase{1, 3, 3, 1, 3, 1, 0, false}, ConvCase{3, 9, 4, 5, 1, 2, 0, true}));

TEST(OpsForwardTest, ConvRejectsMismatchedChannels)
{
  Tape tape;
  EXPECT_THROW(
    ts::conv2d(tape, Tensor::zeros({3, 4, 4}), Tensor::zeros({2, 2, 3, 3}), Tensor(), 1, 1),
    ShapeError);
}

TEST(OpsForwardTest, SegmentMaxEmptySegmentIsZero)
{
  auto tape = Tape::inference();
  const Tensor x = Tensor::from({3, 2}, {1, -5, 3, -2, -1, -7});
  const std::vector<std::size_t> offsets{0, 2, 2, 3};
  const auto y = values(ts::segment_max(tape, x, offsets));
  EXPECT_EQ(y, (std::vector<double>{3, -2, 0, 0, -1, -7}));
}

TEST(OpsForwardTest, ScatterLeavesUntouchedCellsZero)
{
  auto tape = Tape::inference();
  const Tensor rows = Tensor::from({2, 2}, {1, 2, 3, 4});
  const std::vector<std::size_t> cells{3, 0};
  const auto y = values(ts::scatter_rows_to_grid(tape, rows, cells, 2, 2));
  EXPECT_EQ(y, (std::vector<double>{3, 0, 0, 1, 4, 0, 0, 2}));
}

TEST(OpsForwardTest, UpsampleNearestCrops)
{
  auto tape = Tape::inference();
  const Tensor x = Tensor::from({1, 2, 2}, {1, 2, 3, 4});
  const auto y = values(ts::upsample_nearest(tape, x, 2, 3, 4));
  EXPECT_EQ(y, (std::vector<double>{1, 1, 2, 2, 1, 1, 2, 2, 3, 3, 4, 4}));
}

TEST(OpsForwardTest, FocalLossMatchesClosedForm)
{
  auto tape = Tape::inference();
  const Tensor logits = Tensor::from({2}, {0.3, -1.2});
  const std::vector<double> targets{1.0, 0.0};
  const std::vector<double> weights{1.0, 2.0};
  const double alpha = 0.25;
  const double gamma = 2.0;
  const double p0 = 1.0 / (1.0 + std::exp(-0.3));
  const double p1 = 1.0 / (1.0 + std::exp(1.2));
  const double expected = -alpha * std::pow(1 - p0, gamma) * std::log(p0) -
                          2.0 * (1 - alpha) * std::pow(p1, gamma) * std::log(1 - p1);
  EXPECT_NEAR(
    ts::sigmoid_focal_loss(tape, logits, targets, weights, alpha, gamma).item(), expected, 1e-12);
  const Tensor probs = Tensor::from({2}, {p0, p1});
  EXPECT_NEAR(
    ts::binary_focal_loss(tape, probs, targets, weights, alpha, gamma).item(), expected, 1e-12);
}

TEST(OpsForwardTest, SmoothL1BranchesAndSineMask)
{
  auto tape = Tape::inference();
  const double beta = 1.0 / 9.0;
  const Tensor pred = Tensor::from({3}, {0.05, 2.0, 0.5 + 2 * M_PI});
  const std::vector<double> target{0.0, 0.0, 0.5};
  const std::vector<double> weights{1.0, 1.0, 1.0};
  const std::vector<std::uint8_t> mask{0, 0, 1};
  const double expected = 0.5 * 0.05 * 0.05 / beta + (2.0 - 0.5 * beta) +
                          0.5 * std::pow(std::sin(2 * M_PI), 2) / beta;
  EXPECT_NEAR(ts::smooth_l1_loss(tape, pred, target, weights, beta, mask).item(), expected, 1e-12);
}

TEST(OpsForwardTest, BatchNormEvalUsesRunningStatistics)
{
  auto tape = Tape::inference();
  const Tensor x = Tensor::from({1, 1, 2}, {1.0, 3.0});
  const Tensor gamma = Tensor::from({1}, {2.0});
  const Tensor beta = Tensor::from({1}, {0.5});
  Tensor rm = Tensor::from({1}, {1.0});
  Tensor rv = Tensor::from({1}, {4.0});
  const auto y = values(ts::batch_norm2d(tape, x, gamma, beta, rm, rv, false));
  const double s = 1.0 / std::sqrt(4.0 + ts::kBatchNormEps);
  EXPECT_NEAR(y[0], 0.5, 1e-15);
  EXPECT_NEAR(y[1], 2.0 * 2.0 * s + 0.5, 1e-15);
}

TEST(OpsForwardTest, BatchNormTrainingUpdatesRunningStatistics)
{
  auto tape = Tape::inference();
  const Tensor x = Tensor::from({1, 1, 4}, {1.0, 2.0, 3.0, 6.0});
  Tensor rm = Tensor::from({1}, {0.0});
  Tensor rv = Tensor::from({1}, {1.0});
  const auto y = values(ts::batch_norm2d(
    tape, x, Tensor::from({1}, {1.0}), Tensor::from({1}, {0.0}), rm, rv, true));
  // mean 3, biased variance 3.5, unbiased 14/3.
  EXPECT_NEAR(rm.item(), 0.1 * 3.0, 1e-15);
  EXPECT_NEAR(rv.item(), 0.9 + 0.1 * 14.0 / 3.0, 1e-15);
  EXPECT_NEAR(y[3], 3.0 / std::sqrt(3.5 + ts::kBatchNormEps), 1e-12);
}

// ---------------------------------------------------------------------------
// Gradient checks: every differentiable op against central differences.

TEST(GradientTest, Elementwise)
{
  std::mt19937_64 rng(11);
  Tensor a = random_tensor({3, 4}, rng);
  Tensor b = random_tensor({3, 4}, rng);
  const auto r = check_gradients(
    [&](Tape & t) {
      Tensor y = ts::add(t, ts::mul(t, a, b), ts::sub(t, a, ts::scale(t, b, 0.7)));
      y = ts::add(t, ts::relu(t, y), ts::sigmoid(t, a));
      return ts::add(t, weighted_sum(t, y), ts::mean(t, b));
    },
    {a, b});
  EXPECT_LE(r.max_rel_error, kGradTolerance) << r.worst;
}

TEST(GradientTest, Linear)
{
  std::mt19937_64 rng(12);
  Tensor x = random_tensor({4, 5}, rng);
  Tensor w = random_tensor({3, 5}, rng);
  Tensor b = random_tensor({3}, rng);
  const auto r = check_gradients(
    [&](Tape & t) { return weighted_sum(t, ts::linear(t, x, w, b)); }, {x, w, b});
  EXPECT_LE(r.max_rel_error, kGradTolerance) << r.worst;
}

TEST_P(ConvOracleTest, GradientsMatchFiniteDifferences)
{
  const ConvCase c = GetParam();
  std::mt19937_64 rng(13);
  Tensor x = random_tensor({c.c_in, c.h, c.w}, rng);
  Tensor w = random_tensor({c.c_out, c.c_in, c.k, c.k}, rng);
  Tensor b = c.bias ? random_tensor({c.c_out}, rng) : Tensor();
  std::vector<Tensor> inputs{x, w};
  if (c.bias) {
    inputs.push_back(b);
  }
  const auto r = check_gradients(
    [&](Tape & t) { return weighted_sum(t, ts::conv2d(t, x, w, b, c.stride, c.pad)); }, inputs);
  EXPECT_LE(r.max_rel_error, kGradTolerance) << r.worst;
}

TEST(GradientTest, BatchNormTrainingAndEval)
{
  std::mt19937_64 rng(14);
  Tensor x = random_tensor({3, 4, 5}, rng, -2, 2);
  Tensor gamma = random_tensor({3}, rng, 0.5, 1.5);
  Tensor beta = random_tensor({3}, rng);
  Tensor rm = Tensor::zeros({3});
  Tensor rv = Tensor::full({3}, 1.0);
  for (bool training : {true, false}) {
    const auto r = check_gradients(
      [&](Tape & t) {
        return weighted_sum(t, ts::batch_norm2d(t, x, gamma, beta, rm, rv, training));
      },
      {x, gamma, beta});
    EXPECT_LE(r.max_rel_error, kGradTolerance) << (training ? "training: " : "eval: ") << r.worst;
  }
}

TEST(GradientTest, RowReductionsAndGathers)
{
  std::mt19937_64 rng(15);
  Tensor x = random_tensor({6, 3}, rng);
  const std::vector<std::size_t> offsets{0, 2, 2, 6};
  const std::vector<std::size_t> idx{5, 0, 0, 3, 2};
  const auto r = check_gradients(
    [&](Tape & t) {
      Tensor y = ts::add(t, weighted_sum(t, ts::segment_max(t, x, offsets), 1),
                         weighted_sum(t, ts::max_over_rows(t, x), 2));
      return ts::add(t, y, weighted_sum(t, ts::gather_rows(t, x, idx), 3));
    },
    {x});
  EXPECT_LE(r.max_rel_error, kGradTolerance) << r.worst;
}

TEST(GradientTest, ConcatenationsScatterAndUpsample)
{
  std::mt19937_64 rng(16);
  Tensor a = random_tensor({4, 2}, rng);
  Tensor b = random_tensor({4, 3}, rng);
  Tensor m1 = random_tensor({2, 3, 3}, rng);
  Tensor m2 = random_tensor({1, 3, 3}, rng);
  Tensor small = random_tensor({2, 2, 2}, rng);
  Tensor rows = random_tensor({3, 2}, rng);
  const std::vector<std::size_t> cells{8, 0, 4};
  const auto r = check_gradients(
    [&](Tape & t) {
      const std::vector<Tensor> cols{a, b};
      const std::vector<Tensor> chans{m1, m2};
      Tensor y = weighted_sum(t, ts::concat_cols(t, cols), 1);
      y = ts::add(t, y, weighted_sum(t, ts::concat_channels(t, chans), 2));
      y = ts::add(t, y, weighted_sum(t, ts::upsample_nearest(t, small, 2, 3, 4), 3));
      return ts::add(t, y, weighted_sum(t, ts::scatter_rows_to_grid(t, rows, cells, 3, 3), 4));
    },
    {a, b, m1, m2, small, rows});
  EXPECT_LE(r.max_rel_error, kGradTolerance) << r.worst;
}

TEST(GradientTest, Losses)
{
  std::mt19937_64 rng(17);
  Tensor logits = random_tensor({6}, rng, -3, 3);
  Tensor probs = random_tensor({6}, rng, 0.05, 0.95);
  Tensor pred = random_tensor({6}, rng, -1, 1);
  const std::vector<double> targets{1, 0, 1, 0, 0, 1};
  const std::vector<double> weights{1, 2, 0.5, 1, 0, 1};
  const std::vector<double> reg_target{0.2, -0.5, 0.9, 0.0, 0.01, -2.0};
  const std::vector<std::uint8_t> mask{0, 0, 1, 0, 0, 1};
  const auto r = check_gradients(
    [&](Tape & t) {
      Tensor y = ts::sigmoid_focal_loss(t, logits, targets, weights, 0.25, 2.0);
      y = ts::add(t, y, ts::binary_focal_loss(t, probs, targets, weights, 0.25, 2.0));
      return ts::add(t, y, ts::smooth_l1_loss(t, pred, reg_target, weights, 1.0 / 9.0, mask));
    },
    {logits, probs, pred});
  EXPECT_LE(r.max_rel_error, kGradTolerance) << r.worst;
}

}  // namespace
