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

#include "fusionlab/tensor.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include "fusionlab/error.hpp"

namespace fusionlab::tensor
{

std::size_t numel_of(const Shape & shape)
{
  return std::accumulate(
    shape.begin(), shape.end(), std::size_t{1}, std::multiplies<std::size_t>());
}

std::string shape_string(const Shape & shape)
{
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    os << (i ? "x" : "") << shape[i];
  }
  os << ']';
  return os.str();
}

namespace detail
{
Buffer & Storage::grad_buffer()
{
  if (grad.empty()) {
    grad.assign(data.size(), 0.0);
  }
  return grad;
}
}  // namespace detail

Tensor Tensor::zeros(Shape shape, bool requires_grad)
{
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad)
{
  auto impl = std::make_shared<detail::Storage>();
  impl->data.assign(numel_of(shape), value);
  impl->shape = std::move(shape);
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::from(Shape shape, std::vector<double> data, bool requires_grad)
{
  if (numel_of(shape) != data.size()) {
    throw ShapeError(
      "tensor data length " + std::to_string(data.size()) + " does not match shape " +
      shape_string(shape));
  }
  auto impl = std::make_shared<detail::Storage>();
  impl->shape = std::move(shape);
  impl->data.assign(data.begin(), data.end());
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::scalar(double value, bool requires_grad)
{
  return from({1}, {value}, requires_grad);
}

const Shape & Tensor::shape() const
{
  if (!impl_) {
    throw Error("use of undefined tensor");
  }
  return impl_->shape;
}

std::size_t Tensor::dim(std::size_t axis) const
{
  const auto & s = shape();
  if (axis >= s.size()) {
    throw ShapeError(
      "axis " + std::to_string(axis) + " out of range for shape " + shape_string(s));
  }
  return s[axis];
}

std::size_t Tensor::numel() const { return impl_ ? impl_->data.size() : 0; }

std::span<const double> Tensor::data() const
{
  shape();
  return impl_->data;
}

std::span<double> Tensor::mutable_data()
{
  shape();
  return impl_->data;
}

double Tensor::item() const
{
  if (numel() != 1) {
    throw ShapeError("item() on tensor of shape " + shape_string(shape()));
  }
  return impl_->data[0];
}

bool Tensor::has_grad() const { return impl_ && !impl_->grad.empty(); }

std::span<const double> Tensor::grad() const
{
  shape();
  return impl_->grad;
}

std::span<double> Tensor::mutable_grad()
{
  shape();
  return impl_->grad_buffer();
}

void Tensor::zero_grad()
{
  if (impl_ && !impl_->grad.empty()) {
    std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
  }
}

bool Tensor::requires_grad() const { return impl_ && impl_->requires_grad; }

void Tensor::set_requires_grad(bool value)
{
  shape();
  impl_->requires_grad = value;
}

bool Tensor::recorded() const { return impl_ && impl_->node >= 0; }

Tensor Tensor::detach() const
{
  auto impl = std::make_shared<detail::Storage>();
  impl->shape = shape();
  impl->data = impl_->data;
  return Tensor(std::move(impl));
}

bool Tape::should_record(std::initializer_list<const Tensor *> inputs) const
{
  if (!enabled_) {
    return false;
  }
  return std::any_of(
    inputs.begin(), inputs.end(), [](const Tensor * t) { return t && t->requires_grad(); });
}

bool Tape::should_record(std::span<const Tensor> inputs) const
{
  if (!enabled_) {
    return false;
  }
  return std::any_of(
    inputs.begin(), inputs.end(), [](const Tensor & t) { return t.requires_grad(); });
}

void Tape::record(const Tensor & output, BackwardFn fn)
{
  auto & impl = output.storage();
  impl->requires_grad = true;
  impl->tape = this;
  impl->node = static_cast<std::ptrdiff_t>(nodes_.size());
  nodes_.push_back(Node{impl, std::move(fn)});
}

void Tape::backward(const Tensor & root)
{
  if (root.numel() != 1) {
    throw ShapeError("backward() needs a scalar root, got " + shape_string(root.shape()));
  }
  const auto & impl = root.storage();
  if (!impl->requires_grad) {
    return;  // constant: nothing upstream depends on a leaf
  }
  impl->grad_buffer()[0] += 1.0;
  if (impl->node < 0) {
    return;  // the root is itself a leaf
  }
  if (impl->tape != this) {
    throw Error("backward() root was recorded on a different tape");
  }
  for (auto i = impl->node; i >= 0; --i) {
    auto & node = nodes_[static_cast<std::size_t>(i)];
    if (node.output->grad.empty()) {
      continue;
    }
    node.backward(node.output->grad);
  }
}

void accumulate_grad(const Tensor & t, std::span<const double> values)
{
  if (!t.requires_grad()) {
    return;
  }
  auto & g = t.storage()->grad_buffer();
  for (std::size_t i = 0; i < values.size(); ++i) {
    g[i] += values[i];
  }
}

}  // namespace fusionlab::tensor
