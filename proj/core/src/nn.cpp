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

#include "fusionlab/nn.hpp"

#include <cmath>
#include <unordered_map>

#include "fusionlab/error.hpp"

namespace fusionlab::nn
{

std::vector<Tensor> trainable(const StateList & state)
{
  std::vector<Tensor> out;
  for (const auto & e : state) {
    if (e.trainable) {
      out.push_back(e.tensor);
    }
  }
  return out;
}

std::size_t parameter_count(const StateList & state)
{
  std::size_t n = 0;
  for (const auto & e : state) {
    if (e.trainable) {
      n += e.tensor.numel();
    }
  }
  return n;
}

void zero_grads(const StateList & state)
{
  for (const auto & e : state) {
    Tensor t = e.tensor;
    t.zero_grad();
  }
}

void load_state(const StateList & target, const StateList & source)
{
  std::unordered_map<std::string, const Tensor *> by_name;
  for (const auto & e : source) {
    by_name.emplace(e.name, &e.tensor);
  }
  for (const auto & e : target) {
    auto it = by_name.find(e.name);
    if (it == by_name.end()) {
      throw FormatError("checkpoint is missing tensor '" + e.name + "'");
    }
    const Tensor & src = *it->second;
    if (src.shape() != e.tensor.shape()) {
      throw ShapeError(
        "checkpoint tensor '" + e.name + "' has shape " + tensor::shape_string(src.shape()) +
        ", model expects " + tensor::shape_string(e.tensor.shape()));
    }
    Tensor dst = e.tensor;
    auto d = dst.mutable_data();
    auto s = src.data();
    std::copy(s.begin(), s.end(), d.begin());
  }
}

void kaiming_uniform(Tensor & t, std::size_t fan_in, std::mt19937_64 & rng)
{
  const double bound = std::sqrt(6.0 / static_cast<double>(std::max<std::size_t>(fan_in, 1)));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (double & v : t.mutable_data()) {
    v = dist(rng);
  }
}

Linear::Linear(std::size_t in, std::size_t out, std::mt19937_64 & rng, bool with_bias)
{
  weight = Tensor::zeros({out, in}, true);
  kaiming_uniform(weight, in, rng);
  if (with_bias) {
    bias = Tensor::zeros({out}, true);
  }
}

Tensor Linear::forward(Tape & tape, const Tensor & x) const
{
  return tensor::linear(tape, x, weight, bias);
}

void Linear::collect(const std::string & prefix, StateList & out) const
{
  out.push_back({prefix + ".weight", weight, true});
  if (bias.defined()) {
    out.push_back({prefix + ".bias", bias, true});
  }
}

Conv2d::Conv2d(
  std::size_t in, std::size_t out, std::size_t kernel, int stride_, std::mt19937_64 & rng,
  bool with_bias)
: stride(stride_), pad(static_cast<int>(kernel / 2))
{
  weight = Tensor::zeros({out, in, kernel, kernel}, true);
  kaiming_uniform(weight, in * kernel * kernel, rng);
  if (with_bias) {
    bias = Tensor::zeros({out}, true);
  }
}

Tensor Conv2d::forward(Tape & tape, const Tensor & x) const
{
  return tensor::conv2d(tape, x, weight, bias, stride, pad);
}

void Conv2d::collect(const std::string & prefix, StateList & out) const
{
  out.push_back({prefix + ".weight", weight, true});
  if (bias.defined()) {
    out.push_back({prefix + ".bias", bias, true});
  }
}

BatchNorm2d::BatchNorm2d(std::size_t channels)
: gamma(Tensor::full({channels}, 1.0, true)),
  beta(Tensor::zeros({channels}, true)),
  running_mean(Tensor::zeros({channels})),
  running_var(Tensor::full({channels}, 1.0))
{
}

Tensor BatchNorm2d::forward(Tape & tape, const Tensor & x, bool training)
{
  return tensor::batch_norm2d(tape, x, gamma, beta, running_mean, running_var, training);
}

void BatchNorm2d::collect(const std::string & prefix, StateList & out) const
{
  out.push_back({prefix + ".gamma", gamma, true});
  out.push_back({prefix + ".beta", beta, true});
  out.push_back({prefix + ".running_mean", running_mean, false});
  out.push_back({prefix + ".running_var", running_var, false});
}

ConvBlock::ConvBlock(std::size_t in, std::size_t out, int stride, std::mt19937_64 & rng)
: conv(in, out, 3, stride, rng, false), bn(out)
{
}

Tensor ConvBlock::forward(Tape & tape, const Tensor & x, bool training)
{
  return tensor::relu(tape, bn.forward(tape, conv.forward(tape, x), training));
}

void ConvBlock::collect(const std::string & prefix, StateList & out) const
{
  conv.collect(prefix + ".conv", out);
  bn.collect(prefix + ".bn", out);
}

}  // namespace fusionlab::nn
