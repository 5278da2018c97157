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

#ifndef FUSIONLAB__NN_HPP_
#define FUSIONLAB__NN_HPP_

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "fusionlab/ops.hpp"
#include "fusionlab/tensor.hpp"

namespace fusionlab::nn
{

using tensor::Tape;
using tensor::Tensor;

/// One named entry of a model's state. Non-trainable entries are buffers
/// (batch-norm running statistics) that are checkpointed but not optimized.
struct NamedTensor
{
  std::string name;
  Tensor tensor;
  bool trainable{true};
};

using StateList = std::vector<NamedTensor>;

std::vector<Tensor> trainable(const StateList & state);
std::size_t parameter_count(const StateList & state);
void zero_grads(const StateList & state);

/// Copies values by name; every entry of `target` must be present in
/// `source` with an identical shape.
void load_state(const StateList & target, const StateList & source);

/// Kaiming-uniform initialization, bound sqrt(6 / fan_in).
void kaiming_uniform(Tensor & t, std::size_t fan_in, std::mt19937_64 & rng);

class Linear
{
public:
  Linear() = default;
  Linear(std::size_t in, std::size_t out, std::mt19937_64 & rng, bool with_bias = true);

  Tensor forward(Tape & tape, const Tensor & x) const;
  void collect(const std::string & prefix, StateList & out) const;

  std::size_t in_features() const { return weight.dim(1); }
  std::size_t out_features() const { return weight.dim(0); }

  Tensor weight;  // out x in
  Tensor bias;    // out
};

class Conv2d
{
public:
  Conv2d() = default;
  Conv2d(
    std::size_t in, std::size_t out, std::size_t kernel, int stride, std::mt19937_64 & rng,
    bool with_bias = true);

  Tensor forward(Tape & tape, const Tensor & x) const;
  void collect(const std::string & prefix, StateList & out) const;

  std::size_t in_channels() const { return weight.dim(1); }
  std::size_t out_channels() const { return weight.dim(0); }

  Tensor weight;  // out x in x k x k
  Tensor bias;    // out, may be undefined
  int stride{1};
  int pad{0};
};

class BatchNorm2d
{
public:
  BatchNorm2d() = default;
  explicit BatchNorm2d(std::size_t channels);

  Tensor forward(Tape & tape, const Tensor & x, bool training);
  void collect(const std::string & prefix, StateList & out) const;

  Tensor gamma;
  Tensor beta;
  Tensor running_mean;
  Tensor running_var;
};

/// conv3x3(stride) -> batch norm -> ReLU.
class ConvBlock
{
public:
  ConvBlock() = default;
  ConvBlock(std::size_t in, std::size_t out, int stride, std::mt19937_64 & rng);

  Tensor forward(Tape & tape, const Tensor & x, bool training);
  void collect(const std::string & prefix, StateList & out) const;

  Conv2d conv;
  BatchNorm2d bn;
};

}  // namespace fusionlab::nn

#endif  // FUSIONLAB__NN_HPP_
