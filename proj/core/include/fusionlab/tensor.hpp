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

#ifndef FUSIONLAB__TENSOR_HPP_
#define FUSIONLAB__TENSOR_HPP_

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace fusionlab::tensor
{

using Shape = std::vector<std::size_t>;

std::size_t numel_of(const Shape & shape);
std::string shape_string(const Shape & shape);

class Tape;

namespace detail
{
/// Element buffer aligned for the widest SIMD packet. Vectorized kernels peel
/// leading elements according to the buffer address, so a fixed alignment is
/// what keeps results bitwise independent of where the allocator lands.
using Buffer = std::vector<double, Eigen::aligned_allocator<double>>;

struct Storage
{
  Shape shape;
  Buffer data;
  Buffer grad;  // empty until a gradient reaches this tensor
  bool requires_grad{false};
  const Tape * tape{nullptr};
  std::ptrdiff_t node{-1};

  Buffer & grad_buffer();
};
}  // namespace detail

/// Dense row-major f64 tensor with shared storage.
///
/// Copies of a Tensor alias the same buffer. Leaves created with
/// requires_grad accumulate gradients across backward passes until
/// zero_grad() is called; intermediate tensors are owned by the tape that
/// produced them.
class Tensor
{
public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> data, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const noexcept { return static_cast<bool>(impl_); }
  const Shape & shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;

  std::span<const double> data() const;
  std::span<double> mutable_data();
  double item() const;
  double at(std::size_t flat_index) const { return data()[flat_index]; }

  bool has_grad() const;
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad();

  bool requires_grad() const;
  void set_requires_grad(bool value);
  bool recorded() const;

  /// Same values, fresh storage, no tape participation.
  Tensor detach() const;

  // Internal: used by ops and the tape.
  const std::shared_ptr<detail::Storage> & storage() const { return impl_; }
  explicit Tensor(std::shared_ptr<detail::Storage> impl) : impl_(std::move(impl)) {}

private:
  std::shared_ptr<detail::Storage> impl_;
};

/// Define-by-run tape. Nodes are appended in execution order, so every input
/// precedes its consumer; backward() walks them once in reverse.
class Tape
{
public:
  using BackwardFn = std::function<void(std::span<const double> grad_out)>;

  /// A disabled tape records nothing and every op output is a plain value.
  explicit Tape(bool enabled = true) : enabled_(enabled) {}
  Tape(const Tape &) = delete;
  Tape & operator=(const Tape &) = delete;

  static Tape inference() { return Tape(false); }

  bool enabled() const noexcept { return enabled_; }
  std::size_t size() const noexcept { return nodes_.size(); }

  /// True when an op over these inputs must be recorded.
  bool should_record(std::initializer_list<const Tensor *> inputs) const;
  bool should_record(std::span<const Tensor> inputs) const;

  /// Registers `output` as produced by `fn`.
  void record(const Tensor & output, BackwardFn fn);

  /// Populates grads of every leaf reachable from the scalar `root`.
  void backward(const Tensor & root);

private:
  struct Node
  {
    std::shared_ptr<detail::Storage> output;
    BackwardFn backward;
  };

  bool enabled_;
  std::vector<Node> nodes_;
};

/// Accumulates `values` into the gradient of `t` when it participates in
/// differentiation.
void accumulate_grad(const Tensor & t, std::span<const double> values);

}  // namespace fusionlab::tensor

#endif  // FUSIONLAB__TENSOR_HPP_
