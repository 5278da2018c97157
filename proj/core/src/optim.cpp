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

#include "fusionlab/optim.hpp"

#include <cmath>

namespace fusionlab::optim
{

Adam::Adam(const nn::StateList & params, AdamOptions options) : options_(options)
{
  for (const auto & e : params) {
    if (!e.trainable) {
      continue;
    }
    params_.push_back(e);
    m_.push_back(tensor::Tensor::zeros(e.tensor.shape()));
    v_.push_back(tensor::Tensor::zeros(e.tensor.shape()));
  }
  step_tensor_ = tensor::Tensor::scalar(0.0);
}

void Adam::step()
{
  ++step_;
  step_tensor_.mutable_data()[0] = static_cast<double>(step_);
  const double t = static_cast<double>(step_);
  const double c1 = 1.0 - std::pow(options_.beta1, t);
  const double c2 = 1.0 - std::pow(options_.beta2, t);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    tensor::Tensor p = params_[i].tensor;
    if (!p.has_grad()) {
      continue;
    }
    auto g = p.grad();
    auto w = p.mutable_data();
    auto m = m_[i].mutable_data();
    auto v = v_[i].mutable_data();
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = options_.beta1 * m[j] + (1.0 - options_.beta1) * g[j];
      v[j] = options_.beta2 * v[j] + (1.0 - options_.beta2) * g[j] * g[j];
      const double m_hat = m[j] / c1;
      const double v_hat = v[j] / c2;
      w[j] -= options_.lr * m_hat / (std::sqrt(v_hat) + options_.eps);
    }
  }
}

void Adam::zero_grad() { nn::zero_grads(params_); }

nn::StateList Adam::state() const
{
  nn::StateList out;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    out.push_back({"adam.m." + params_[i].name, m_[i], false});
    out.push_back({"adam.v." + params_[i].name, v_[i], false});
  }
  out.push_back({"adam.step", step_tensor_, false});
  return out;
}

void Adam::sync_step_from_tensor()
{
  step_ = static_cast<std::uint64_t>(std::llround(step_tensor_.item()));
}

void load_optimizer_state(Adam & adam, const nn::StateList & source)
{
  nn::load_state(adam.state(), source);
  adam.sync_step_from_tensor();
}

}  // namespace fusionlab::optim
