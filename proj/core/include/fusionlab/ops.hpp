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

#ifndef FUSIONLAB__OPS_HPP_
#define FUSIONLAB__OPS_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "fusionlab/tensor.hpp"

// Differentiable operations. Every op takes the tape first; when the tape is
// disabled or no input requires a gradient, the op is a plain forward
// computation.
namespace fusionlab::tensor
{

Tensor add(Tape & tape, const Tensor & a, const Tensor & b);
Tensor sub(Tape & tape, const Tensor & a, const Tensor & b);
Tensor mul(Tape & tape, const Tensor & a, const Tensor & b);
Tensor scale(Tape & tape, const Tensor & a, double factor);

Tensor relu(Tape & tape, const Tensor & x);
Tensor sigmoid(Tape & tape, const Tensor & x);

Tensor sum(Tape & tape, const Tensor & x);
Tensor mean(Tape & tape, const Tensor & x);

/// x: N x in, weight: out x in, bias: out (may be undefined) -> N x out.
Tensor linear(Tape & tape, const Tensor & x, const Tensor & weight, const Tensor & bias);

/// x: C_in x H x W, weight: C_out x C_in x k x k (k odd), bias: C_out or
/// undefined. Output: C_out x floor((H + 2 pad - k) / stride + 1) x (same for W).
Tensor conv2d(
  Tape & tape, const Tensor & x, const Tensor & weight, const Tensor & bias, int stride, int pad);

constexpr double kBatchNormEps = 1e-5;
constexpr double kBatchNormMomentum = 0.1;

/// Per-channel normalization of a C x H x W map. Training mode normalizes with
/// the map's own statistics and updates the running buffers in place; eval
/// mode is the affine map gamma * (x - running_mean) / sqrt(running_var + eps) + beta.
Tensor batch_norm2d(
  Tape & tape, const Tensor & x, const Tensor & gamma, const Tensor & beta, Tensor & running_mean,
  Tensor & running_var, bool training, double eps = kBatchNormEps,
  double momentum = kBatchNormMomentum);

/// N x D -> 1 x D.
Tensor max_over_rows(Tape & tape, const Tensor & x);

/// Row-segment max: segment s covers rows [offsets[s], offsets[s+1]).
/// Returns S x D; an empty segment yields a zero row.
Tensor segment_max(Tape & tape, const Tensor & x, std::span<const std::size_t> offsets);

/// out[i] = x[indices[i]].
Tensor gather_rows(Tape & tape, const Tensor & x, std::span<const std::size_t> indices);

/// Column-wise concatenation of N x D_i matrices.
Tensor concat_cols(Tape & tape, std::span<const Tensor> parts);

/// Channel concatenation of C_i x H x W maps.
Tensor concat_channels(Tape & tape, std::span<const Tensor> parts);

/// Places row s of an S x D matrix at flat cell index cells[s] of a D x H x W
/// map; untouched cells stay zero. Cells must be distinct.
Tensor scatter_rows_to_grid(
  Tape & tape, const Tensor & rows, std::span<const std::size_t> cells, std::size_t height,
  std::size_t width);

/// Nearest-neighbour upsampling by an integer factor, cropped to out_h x out_w.
Tensor upsample_nearest(
  Tape & tape, const Tensor & x, std::size_t factor, std::size_t out_h, std::size_t out_w);

/// Sum over elements of weight_i * FL(sigmoid(logit_i), target_i) where
/// FL(p, 1) = -alpha (1-p)^gamma log p and FL(p, 0) = -(1-alpha) p^gamma log(1-p).
/// Computed from logits for numerical stability.
Tensor sigmoid_focal_loss(
  Tape & tape, const Tensor & logits, std::span<const double> targets,
  std::span<const double> weights, double alpha, double gamma);

/// Same loss evaluated on probabilities, which are clamped to [eps, 1-eps]
/// inside the logarithms only.
Tensor binary_focal_loss(
  Tape & tape, const Tensor & probs, std::span<const double> targets,
  std::span<const double> weights, double alpha, double gamma, double eps = 1e-12);

/// Sum of weight_i * smoothL1(d_i) with d_i = pred_i - target_i, or
/// d_i = sin(pred_i - target_i) where sine_mask[i] is set. An empty mask
/// means no sine-wrapped entries.
Tensor smooth_l1_loss(
  Tape & tape, const Tensor & pred, std::span<const double> target,
  std::span<const double> weights, double beta, std::span<const std::uint8_t> sine_mask = {});

}  // namespace fusionlab::tensor

#endif  // FUSIONLAB__OPS_HPP_
