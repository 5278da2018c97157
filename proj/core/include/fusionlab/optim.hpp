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

#ifndef FUSIONLAB__OPTIM_HPP_
#define FUSIONLAB__OPTIM_HPP_

#include <cstdint>
#include <vector>

#include "fusionlab/nn.hpp"

namespace fusionlab::optim
{

struct AdamOptions
{
  double lr{1e-3};
  double beta1{0.9};
  double beta2{0.999};
  double eps{1e-8};
};

class Adam
{
public:
  Adam(const nn::StateList & params, AdamOptions options = {});

  /// One update from the accumulated gradients; gradients are left untouched.
  void step();
  void zero_grad();

  std::uint64_t steps() const { return step_; }
  const AdamOptions & options() const { return options_; }

  /// Moments and step counter as named tensors, for checkpointing.
  nn::StateList state() const;

private:
  AdamOptions options_;
  nn::StateList params_;
  std::vector<tensor::Tensor> m_;
  std::vector<tensor::Tensor> v_;
  tensor::Tensor step_tensor_;
  std::uint64_t step_{0};

  void sync_step_from_tensor();
  friend void load_optimizer_state(Adam & adam, const nn::StateList & source);
};

/// Restores moments and the step counter written by Adam::state().
void load_optimizer_state(Adam & adam, const nn::StateList & source);

}  // namespace fusionlab::optim

#endif  // FUSIONLAB__OPTIM_HPP_
