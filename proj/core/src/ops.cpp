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

#include "fusionlab/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <string>

#include <Eigen/Core>

#include "fusionlab/error.hpp"

namespace fusionlab::tensor
{

namespace
{

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

double * grad_of(const Tensor & t)
{
  if (!t.requires_grad()) {
    return nullptr;
  }
  return t.storage()->grad_buffer().data();
}

Tensor make_out(Shape shape) { return Tensor::zeros(std::move(shape)); }

void require_same_shape(const Tensor & a, const Tensor & b, const char * op)
{
  if (a.shape() != b.shape()) {
    throw ShapeError(
      std::string(op) + ": shape " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  }
}

void require_rank(const Tensor & t, std::size_t rank, const char * op, const char * what)
{
  if (t.rank() != rank) {
    throw ShapeError(
      std::string(op) + ": " + what + " must have rank " + std::to_string(rank) + ", got " +
      shape_string(t.shape()));
  }
}

void require_aligned(std::size_t n, std::size_t expected, const char * op, const char * what)
{
  if (n != expected) {
    throw ShapeError(
      std::string(op) + ": " + what + " has length " + std::to_string(n) + ", expected " +
      std::to_string(expected));
  }
}

double stable_sigmoid(double z)
{
  if (z >= 0.0) {
    return 1.0 / (1.0 + std::exp(-z));
  }
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

}  // namespace

Tensor add(Tape & tape, const Tensor & a, const Tensor & b)
{
  require_same_shape(a, b, "add");
  auto out = make_out(a.shape());
  auto o = out.mutable_data();
  auto x = a.data();
  auto y = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) {
    o[i] = x[i] + y[i];
  }
  if (tape.should_record({&a, &b})) {
    tape.record(out, [a, b](std::span<const double> g) {
      accumulate_grad(a, g);
      accumulate_grad(b, g);
    });
  }
  return out;
}

Tensor sub(Tape & tape, const Tensor & a, const Tensor & b)
{
  require_same_shape(a, b, "sub");
  auto out = make_out(a.shape());
  auto o = out.mutable_data();
  auto x = a.data();
  auto y = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) {
    o[i] = x[i] - y[i];
  }
  if (tape.should_record({&a, &b})) {
    tape.record(out, [a, b](std::span<const double> g) {
      accumulate_grad(a, g);
      if (double * gb = grad_of(b)) {
        for (std::size_t i = 0; i < g.size(); ++i) {
          gb[i] -= g[i];
        }
      }
    });
  }
  return out;
}

Tensor mul(Tape & tape, const Tensor & a, const Tensor & b)
{
  require_same_shape(a, b, "mul");
  auto out = make_out(a.shape());
  auto o = out.mutable_data();
  auto x = a.data();
  auto y = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) {
    o[i] = x[i] * y[i];
  }
  if (tape.should_record({&a, &b})) {
    tape.record(out, [a, b](std::span<const double> g) {
      auto x = a.data();
      auto y = b.data();
      if (double * ga = grad_of(a)) {
        for (std::size_t i = 0; i < g.size(); ++i) {
          ga[i] += g[i] * y[i];
        }
      }
      if (double * gb = grad_of(b)) {
        for (std::size_t i = 0; i < g.size(); ++i) {
          gb[i] += g[i] * x[i];
        }
      }
    });
  }
  return out;
}

Tensor scale(Tape & tape, const Tensor & a, double factor)
{
  auto out = make_out(a.shape());
  auto o = out.mutable_data();
  auto x = a.data();
  for (std::size_t i = 0; i < o.size(); ++i) {
    o[i] = x[i] * factor;
  }
  if (tape.should_record({&a})) {
    tape.record(out, [a, factor](std::span<const double> g) {
      double * ga = grad_of(a);
      for (std::size_t i = 0; i < g.size(); ++i) {
        ga[i] += g[i] * factor;
      }
    });
  }
  return out;
}

Tensor relu(Tape & tape, const Tensor & x)
{
  auto out = make_out(x.shape());
  auto o = out.mutable_data();
  auto v = x.data();
  for (std::size_t i = 0; i < o.size(); ++i) {
    o[i] = v[i] > 0.0 ? v[i] : 0.0;
  }
  if (tape.should_record({&x})) {
    tape.record(out, [x](std::span<const double> g) {
      double * gx = grad_of(x);
      auto v = x.data();
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (v[i] > 0.0) {
          gx[i] += g[i];
        }
      }
    });
  }
  return out;
}

Tensor sigmoid(Tape & tape, const Tensor & x)
{
  auto out = make_out(x.shape());
  auto o = out.mutable_data();
  auto v = x.data();
  for (std::size_t i = 0; i < o.size(); ++i) {
    o[i] = stable_sigmoid(v[i]);
  }
  if (tape.should_record({&x})) {
    tape.record(out, [x, s = out.storage()](std::span<const double> g) {
      double * gx = grad_of(x);
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double p = s->data[i];
        gx[i] += g[i] * p * (1.0 - p);
      }
    });
  }
  return out;
}

Tensor sum(Tape & tape, const Tensor & x)
{
  double total = 0.0;
  for (double v : x.data()) {
    total += v;
  }
  auto out = Tensor::scalar(total);
  if (tape.should_record({&x})) {
    tape.record(out, [x](std::span<const double> g) {
      double * gx = grad_of(x);
      const std::size_t n = x.numel();
      for (std::size_t i = 0; i < n; ++i) {
        gx[i] += g[0];
      }
    });
  }
  return out;
}

Tensor mean(Tape & tape, const Tensor & x)
{
  const std::size_t n = x.numel();
  if (n == 0) {
    throw ShapeError("mean: empty tensor");
  }
  return scale(tape, sum(tape, x), 1.0 / static_cast<double>(n));
}

Tensor linear(Tape & tape, const Tensor & x, const Tensor & weight, const Tensor & bias)
{
  require_rank(x, 2, "linear", "input");
  require_rank(weight, 2, "linear", "weight");
  const std::size_t n = x.dim(0);
  const std::size_t in = x.dim(1);
  const std::size_t out_dim = weight.dim(0);
  if (weight.dim(1) != in) {
    throw ShapeError(
      "linear: weight dim 1 is " + std::to_string(weight.dim(1)) + " but input dim 1 is " +
      std::to_string(in));
  }
  if (bias.defined() && bias.numel() != out_dim) {
    throw ShapeError(
      "linear: bias dim 0 is " + std::to_string(bias.numel()) + ", expected " +
      std::to_string(out_dim));
  }
  auto out = make_out({n, out_dim});
  if (n > 0) {
    ConstMap xm(x.data().data(), n, in);
    ConstMap wm(weight.data().data(), out_dim, in);
    MutMap om(out.mutable_data().data(), n, out_dim);
    om.noalias() = xm * wm.transpose();
    if (bias.defined()) {
      Eigen::Map<const Eigen::RowVectorXd> bm(bias.data().data(), out_dim);
      om.rowwise() += bm;
    }
  }
  if (tape.should_record({&x, &weight, &bias})) {
    tape.record(out, [x, weight, bias, n, in, out_dim](std::span<const double> g) {
      if (n == 0) {
        return;
      }
      ConstMap gm(g.data(), n, out_dim);
      if (double * gx = grad_of(x)) {
        MutMap gxm(gx, n, in);
        gxm.noalias() += gm * ConstMap(weight.data().data(), out_dim, in);
      }
      if (double * gw = grad_of(weight)) {
        MutMap gwm(gw, out_dim, in);
        gwm.noalias() += gm.transpose() * ConstMap(x.data().data(), n, in);
      }
      if (bias.defined()) {
        if (double * gb = grad_of(bias)) {
          Eigen::Map<Eigen::RowVectorXd> gbm(gb, out_dim);
          gbm += gm.colwise().sum();
        }
      }
    });
  }
  return out;
}

Tensor conv2d(
  Tape & tape, const Tensor & x, const Tensor & weight, const Tensor & bias, int stride, int pad)
{
  require_rank(x, 3, "conv2d", "input");
  require_rank(weight, 4, "conv2d", "weight");
  if (stride < 1) {
    throw ShapeError("conv2d: stride must be >= 1, got " + std::to_string(stride));
  }
  if (pad < 0) {
    throw ShapeError("conv2d: pad must be >= 0, got " + std::to_string(pad));
  }
  const std::size_t c_in = x.dim(0);
  const std::size_t h = x.dim(1);
  const std::size_t w = x.dim(2);
  const std::size_t c_out = weight.dim(0);
  const std::size_t k = weight.dim(2);
  if (weight.dim(1) != c_in) {
    throw ShapeError(
      "conv2d: weight dim 1 (C_in) is " + std::to_string(weight.dim(1)) +
      " but input dim 0 (C_in) is " + std::to_string(c_in));
  }
  if (weight.dim(3) != k || k % 2 == 0) {
    throw ShapeError("conv2d: kernel must be square and odd, got " + shape_string(weight.shape()));
  }
  if (bias.defined() && bias.numel() != c_out) {
    throw ShapeError(
      "conv2d: bias dim 0 is " + std::to_string(bias.numel()) + ", expected C_out " +
      std::to_string(c_out));
  }
  const auto p = static_cast<std::size_t>(pad);
  const auto s = static_cast<std::size_t>(stride);
  if (h + 2 * p < k) {
    throw ShapeError(
      "conv2d: input dim 1 (H) is " + std::to_string(h) + ", too small for kernel " +
      std::to_string(k) + " with pad " + std::to_string(pad));
  }
  if (w + 2 * p < k) {
    throw ShapeError(
      "conv2d: input dim 2 (W) is " + std::to_string(w) + ", too small for kernel " +
      std::to_string(k) + " with pad " + std::to_string(pad));
  }
  const std::size_t ho = (h + 2 * p - k) / s + 1;
  const std::size_t wo = (w + 2 * p - k) / s + 1;
  const std::size_t hw_out = ho * wo;
  const std::size_t patch = c_in * k * k;

  // im2col; a 1x1 stride-1 unpadded kernel reads the input in place.
  const bool direct = (k == 1 && s == 1 && p == 0);
  std::shared_ptr<detail::Buffer> cols;
  const double * col_data = x.data().data();
  if (!direct) {
    cols = std::make_shared<detail::Buffer>(patch * hw_out, 0.0);
    auto xv = x.data();
    for (std::size_t c = 0; c < c_in; ++c) {
      for (std::size_t ki = 0; ki < k; ++ki) {
        for (std::size_t kj = 0; kj < k; ++kj) {
          double * row = cols->data() + ((c * k + ki) * k + kj) * hw_out;
          for (std::size_t oh = 0; oh < ho; ++oh) {
            const std::ptrdiff_t ih =
              static_cast<std::ptrdiff_t>(oh * s + ki) - static_cast<std::ptrdiff_t>(p);
            if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(h)) {
              continue;
            }
            const double * src = xv.data() + (c * h + static_cast<std::size_t>(ih)) * w;
            double * dst = row + oh * wo;
            for (std::size_t ow = 0; ow < wo; ++ow) {
              const std::ptrdiff_t iw =
                static_cast<std::ptrdiff_t>(ow * s + kj) - static_cast<std::ptrdiff_t>(p);
              if (iw >= 0 && iw < static_cast<std::ptrdiff_t>(w)) {
                dst[ow] = src[iw];
              }
            }
          }
        }
      }
    }
    col_data = cols->data();
  }

  auto out = make_out({c_out, ho, wo});
  {
    ConstMap wm(weight.data().data(), c_out, patch);
    ConstMap cm(col_data, patch, hw_out);
    MutMap om(out.mutable_data().data(), c_out, hw_out);
    om.noalias() = wm * cm;
    if (bias.defined()) {
      Eigen::Map<const Eigen::VectorXd> bm(bias.data().data(), c_out);
      om.colwise() += bm;
    }
  }

  if (tape.should_record({&x, &weight, &bias})) {
    tape.record(
      out, [x, weight, bias, cols, c_in, h, w, c_out, k, s, p, ho, wo, hw_out, patch,
            direct](std::span<const double> g) {
        ConstMap gm(g.data(), c_out, hw_out);
        const double * col_data = direct ? x.data().data() : cols->data();
        if (double * gw = grad_of(weight)) {
          MutMap gwm(gw, c_out, patch);
          gwm.noalias() += gm * ConstMap(col_data, patch, hw_out).transpose();
        }
        if (bias.defined()) {
          if (double * gb = grad_of(bias)) {
            Eigen::Map<Eigen::VectorXd> gbm(gb, c_out);
            gbm += gm.rowwise().sum();
          }
        }
        double * gx = grad_of(x);
        if (!gx) {
          return;
        }
        ConstMap wm(weight.data().data(), c_out, patch);
        if (direct) {
          MutMap gxm(gx, patch, hw_out);
          gxm.noalias() += wm.transpose() * gm;
          return;
        }
        RowMat gcols = wm.transpose() * gm;
        for (std::size_t c = 0; c < c_in; ++c) {
          for (std::size_t ki = 0; ki < k; ++ki) {
            for (std::size_t kj = 0; kj < k; ++kj) {
              const double * row = gcols.data() + ((c * k + ki) * k + kj) * hw_out;
              for (std::size_t oh = 0; oh < ho; ++oh) {
                const std::ptrdiff_t ih =
                  static_cast<std::ptrdiff_t>(oh * s + ki) - static_cast<std::ptrdiff_t>(p);
                if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(h)) {
                  continue;
                }
                double * dst = gx + (c * h + static_cast<std::size_t>(ih)) * w;
                const double * src = row + oh * wo;
                for (std::size_t ow = 0; ow < wo; ++ow) {
                  const std::ptrdiff_t iw =
                    static_cast<std::ptrdiff_t>(ow * s + kj) - static_cast<std::ptrdiff_t>(p);
                  if (iw >= 0 && iw < static_cast<std::ptrdiff_t>(w)) {
                    dst[iw] += src[ow];
                  }
                }
              }
            }
          }
        }
      });
  }
  return out;
}

Tensor batch_norm2d(
  Tape & tape, const Tensor & x, const Tensor & gamma, const Tensor & beta, Tensor & running_mean,
  Tensor & running_var, bool training, double eps, double momentum)
{
  require_rank(x, 3, "batch_norm2d", "input");
  const std::size_t c = x.dim(0);
  const std::size_t m = x.dim(1) * x.dim(2);
  require_aligned(gamma.numel(), c, "batch_norm2d", "gamma");
  require_aligned(beta.numel(), c, "batch_norm2d", "beta");
  require_aligned(running_mean.numel(), c, "batch_norm2d", "running_mean");
  require_aligned(running_var.numel(), c, "batch_norm2d", "running_var");
  auto rmean = running_mean.mutable_data();
  auto rvar = running_var.mutable_data();
  if (m == 0) {
    throw ShapeError("batch_norm2d: empty spatial extent");
  }

  auto out = make_out(x.shape());
  auto xv = x.data();
  auto o = out.mutable_data();
  auto gv = gamma.data();
  auto bv = beta.data();
  const bool record = tape.should_record({&x, &gamma, &beta});

  if (training) {
    auto xhat = std::make_shared<std::vector<double>>(x.numel());
    auto inv_std = std::make_shared<std::vector<double>>(c);
    for (std::size_t ch = 0; ch < c; ++ch) {
      const double * src = xv.data() + ch * m;
      double mu = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        mu += src[i];
      }
      mu /= static_cast<double>(m);
      double var = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        const double d = src[i] - mu;
        var += d * d;
      }
      const double biased = var / static_cast<double>(m);
      const double unbiased = m > 1 ? var / static_cast<double>(m - 1) : biased;
      const double is = 1.0 / std::sqrt(biased + eps);
      (*inv_std)[ch] = is;
      double * xh = xhat->data() + ch * m;
      double * dst = o.data() + ch * m;
      for (std::size_t i = 0; i < m; ++i) {
        xh[i] = (src[i] - mu) * is;
        dst[i] = gv[ch] * xh[i] + bv[ch];
      }
      rmean[ch] = (1.0 - momentum) * rmean[ch] + momentum * mu;
      rvar[ch] = (1.0 - momentum) * rvar[ch] + momentum * unbiased;
    }
    if (record) {
      tape.record(out, [x, gamma, beta, xhat, inv_std, c, m](std::span<const double> g) {
        double * gx = grad_of(x);
        double * gg = grad_of(gamma);
        double * gb = grad_of(beta);
        auto gv = gamma.data();
        const double md = static_cast<double>(m);
        for (std::size_t ch = 0; ch < c; ++ch) {
          const double * gy = g.data() + ch * m;
          const double * xh = xhat->data() + ch * m;
          double sum_g = 0.0;
          double sum_gx = 0.0;
          for (std::size_t i = 0; i < m; ++i) {
            sum_g += gy[i];
            sum_gx += gy[i] * xh[i];
          }
          if (gg) {
            gg[ch] += sum_gx;
          }
          if (gb) {
            gb[ch] += sum_g;
          }
          if (gx) {
            const double k = gv[ch] * (*inv_std)[ch] / md;
            double * dst = gx + ch * m;
            for (std::size_t i = 0; i < m; ++i) {
              dst[i] += k * (md * gy[i] - sum_g - xh[i] * sum_gx);
            }
          }
        }
      });
    }
    return out;
  }

  std::vector<double> rm(rmean.begin(), rmean.end());
  std::vector<double> inv(c);
  for (std::size_t ch = 0; ch < c; ++ch) {
    inv[ch] = 1.0 / std::sqrt(rvar[ch] + eps);
    const double * src = xv.data() + ch * m;
    double * dst = o.data() + ch * m;
    for (std::size_t i = 0; i < m; ++i) {
      dst[i] = gv[ch] * ((src[i] - rm[ch]) * inv[ch]) + bv[ch];
    }
  }
  if (record) {
    tape.record(
      out, [x, gamma, beta, rm = std::move(rm), inv = std::move(inv), c, m](
             std::span<const double> g) {
        double * gx = grad_of(x);
        double * gg = grad_of(gamma);
        double * gb = grad_of(beta);
        auto xv = x.data();
        auto gv = gamma.data();
        for (std::size_t ch = 0; ch < c; ++ch) {
          const double * gy = g.data() + ch * m;
          const double * src = xv.data() + ch * m;
          double sum_g = 0.0;
          double sum_gx = 0.0;
          for (std::size_t i = 0; i < m; ++i) {
            sum_g += gy[i];
            sum_gx += gy[i] * (src[i] - rm[ch]) * inv[ch];
          }
          if (gg) {
            gg[ch] += sum_gx;
          }
          if (gb) {
            gb[ch] += sum_g;
          }
          if (gx) {
            const double k = gv[ch] * inv[ch];
            double * dst = gx + ch * m;
            for (std::size_t i = 0; i < m; ++i) {
              dst[i] += k * gy[i];
            }
          }
        }
      });
  }
  return out;
}

Tensor max_over_rows(Tape & tape, const Tensor & x)
{
  require_rank(x, 2, "max_over_rows", "input");
  if (x.dim(0) == 0) {
    throw ShapeError("max_over_rows: input dim 0 (rows) is 0");
  }
  const std::size_t offsets[2] = {0, x.dim(0)};
  return segment_max(tape, x, offsets);
}

Tensor segment_max(Tape & tape, const Tensor & x, std::span<const std::size_t> offsets)
{
  require_rank(x, 2, "segment_max", "input");
  if (offsets.empty() || offsets.back() > x.dim(0)) {
    throw ShapeError("segment_max: offsets exceed input dim 0 (rows)");
  }
  const std::size_t segments = offsets.size() - 1;
  const std::size_t d = x.dim(1);
  auto out = make_out({segments, d});
  auto argmax = std::make_shared<std::vector<std::size_t>>(segments * d, 0);
  auto xv = x.data();
  auto o = out.mutable_data();
  for (std::size_t s = 0; s < segments; ++s) {
    const std::size_t begin = offsets[s];
    const std::size_t end = offsets[s + 1];
    if (end < begin) {
      throw ShapeError("segment_max: offsets must be non-decreasing");
    }
    if (begin == end) {
      continue;
    }
    for (std::size_t j = 0; j < d; ++j) {
      std::size_t best = begin;
      double best_v = xv[begin * d + j];
      for (std::size_t r = begin + 1; r < end; ++r) {
        const double v = xv[r * d + j];
        if (v > best_v) {
          best_v = v;
          best = r;
        }
      }
      o[s * d + j] = best_v;
      (*argmax)[s * d + j] = best;
    }
  }
  if (tape.should_record({&x})) {
    std::vector<std::size_t> offs(offsets.begin(), offsets.end());
    tape.record(out, [x, argmax, offs = std::move(offs), d](std::span<const double> g) {
      double * gx = grad_of(x);
      for (std::size_t s = 0; s + 1 < offs.size(); ++s) {
        if (offs[s] == offs[s + 1]) {
          continue;
        }
        for (std::size_t j = 0; j < d; ++j) {
          gx[(*argmax)[s * d + j] * d + j] += g[s * d + j];
        }
      }
    });
  }
  return out;
}

Tensor gather_rows(Tape & tape, const Tensor & x, std::span<const std::size_t> indices)
{
  require_rank(x, 2, "gather_rows", "input");
  const std::size_t n = x.dim(0);
  const std::size_t d = x.dim(1);
  auto out = make_out({indices.size(), d});
  auto xv = x.data();
  auto o = out.mutable_data();
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= n) {
      throw ShapeError(
        "gather_rows: index " + std::to_string(indices[i]) + " exceeds input dim 0 (" +
        std::to_string(n) + ")");
    }
    std::copy_n(xv.data() + indices[i] * d, d, o.data() + i * d);
  }
  if (tape.should_record({&x})) {
    std::vector<std::size_t> idx(indices.begin(), indices.end());
    tape.record(out, [x, idx = std::move(idx), d](std::span<const double> g) {
      double * gx = grad_of(x);
      for (std::size_t i = 0; i < idx.size(); ++i) {
        double * dst = gx + idx[i] * d;
        const double * src = g.data() + i * d;
        for (std::size_t j = 0; j < d; ++j) {
          dst[j] += src[j];
        }
      }
    });
  }
  return out;
}

Tensor concat_cols(Tape & tape, std::span<const Tensor> parts)
{
  if (parts.empty()) {
    throw ShapeError("concat_cols: no inputs");
  }
  const std::size_t n = parts[0].dim(0);
  std::size_t total = 0;
  for (const auto & t : parts) {
    require_rank(t, 2, "concat_cols", "input");
    if (t.dim(0) != n) {
      throw ShapeError(
        "concat_cols: input dim 0 (rows) " + std::to_string(t.dim(0)) + " vs " +
        std::to_string(n));
    }
    total += t.dim(1);
  }
  auto out = make_out({n, total});
  auto o = out.mutable_data();
  std::size_t col = 0;
  for (const auto & t : parts) {
    const std::size_t d = t.dim(1);
    auto v = t.data();
    for (std::size_t r = 0; r < n; ++r) {
      std::copy_n(v.data() + r * d, d, o.data() + r * total + col);
    }
    col += d;
  }
  if (tape.should_record(parts)) {
    std::vector<Tensor> inputs(parts.begin(), parts.end());
    tape.record(out, [inputs, n, total](std::span<const double> g) {
      std::size_t col = 0;
      for (const auto & t : inputs) {
        const std::size_t d = t.dim(1);
        if (double * gt = grad_of(t)) {
          for (std::size_t r = 0; r < n; ++r) {
            for (std::size_t j = 0; j < d; ++j) {
              gt[r * d + j] += g[r * total + col + j];
            }
          }
        }
        col += d;
      }
    });
  }
  return out;
}

Tensor concat_channels(Tape & tape, std::span<const Tensor> parts)
{
  if (parts.empty()) {
    throw ShapeError("concat_channels: no inputs");
  }
  const std::size_t h = parts[0].dim(1);
  const std::size_t w = parts[0].dim(2);
  std::size_t channels = 0;
  for (const auto & t : parts) {
    require_rank(t, 3, "concat_channels", "input");
    if (t.dim(1) != h) {
      throw ShapeError(
        "concat_channels: input dim 1 (H) " + std::to_string(t.dim(1)) + " vs " +
        std::to_string(h));
    }
    if (t.dim(2) != w) {
      throw ShapeError(
        "concat_channels: input dim 2 (W) " + std::to_string(t.dim(2)) + " vs " +
        std::to_string(w));
    }
    channels += t.dim(0);
  }
  auto out = make_out({channels, h, w});
  auto o = out.mutable_data();
  std::size_t offset = 0;
  for (const auto & t : parts) {
    std::copy(t.data().begin(), t.data().end(), o.begin() + static_cast<std::ptrdiff_t>(offset));
    offset += t.numel();
  }
  if (tape.should_record(parts)) {
    std::vector<Tensor> inputs(parts.begin(), parts.end());
    tape.record(out, [inputs](std::span<const double> g) {
      std::size_t offset = 0;
      for (const auto & t : inputs) {
        accumulate_grad(t, g.subspan(offset, t.numel()));
        offset += t.numel();
      }
    });
  }
  return out;
}

Tensor scatter_rows_to_grid(
  Tape & tape, const Tensor & rows, std::span<const std::size_t> cells, std::size_t height,
  std::size_t width)
{
  require_rank(rows, 2, "scatter_rows_to_grid", "rows");
  require_aligned(cells.size(), rows.dim(0), "scatter_rows_to_grid", "cells");
  const std::size_t d = rows.dim(1);
  const std::size_t hw = height * width;
  auto out = make_out({d, height, width});
  auto o = out.mutable_data();
  auto v = rows.data();
  for (std::size_t s = 0; s < cells.size(); ++s) {
    if (cells[s] >= hw) {
      throw ShapeError("scatter_rows_to_grid: cell index outside the grid");
    }
    for (std::size_t j = 0; j < d; ++j) {
      o[j * hw + cells[s]] = v[s * d + j];
    }
  }
  if (tape.should_record({&rows})) {
    std::vector<std::size_t> cs(cells.begin(), cells.end());
    tape.record(out, [rows, cs = std::move(cs), d, hw](std::span<const double> g) {
      double * gr = grad_of(rows);
      for (std::size_t s = 0; s < cs.size(); ++s) {
        for (std::size_t j = 0; j < d; ++j) {
          gr[s * d + j] += g[j * hw + cs[s]];
        }
      }
    });
  }
  return out;
}

Tensor upsample_nearest(
  Tape & tape, const Tensor & x, std::size_t factor, std::size_t out_h, std::size_t out_w)
{
  require_rank(x, 3, "upsample_nearest", "input");
  if (factor == 0) {
    throw ShapeError("upsample_nearest: factor must be >= 1");
  }
  const std::size_t c = x.dim(0);
  const std::size_t h = x.dim(1);
  const std::size_t w = x.dim(2);
  if ((out_h + factor - 1) / factor > h) {
    throw ShapeError("upsample_nearest: output dim 1 (H) exceeds upsampled input");
  }
  if ((out_w + factor - 1) / factor > w) {
    throw ShapeError("upsample_nearest: output dim 2 (W) exceeds upsampled input");
  }
  auto out = make_out({c, out_h, out_w});
  auto o = out.mutable_data();
  auto v = x.data();
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t i = 0; i < out_h; ++i) {
      const double * src = v.data() + (ch * h + i / factor) * w;
      double * dst = o.data() + (ch * out_h + i) * out_w;
      for (std::size_t j = 0; j < out_w; ++j) {
        dst[j] = src[j / factor];
      }
    }
  }
  if (tape.should_record({&x})) {
    tape.record(out, [x, factor, c, h, w, out_h, out_w](std::span<const double> g) {
      double * gx = grad_of(x);
      for (std::size_t ch = 0; ch < c; ++ch) {
        for (std::size_t i = 0; i < out_h; ++i) {
          double * dst = gx + (ch * h + i / factor) * w;
          const double * src = g.data() + (ch * out_h + i) * out_w;
          for (std::size_t j = 0; j < out_w; ++j) {
            dst[j / factor] += src[j];
          }
        }
      }
    });
  }
  return out;
}

Tensor sigmoid_focal_loss(
  Tape & tape, const Tensor & logits, std::span<const double> targets,
  std::span<const double> weights, double alpha, double gamma)
{
  const std::size_t n = logits.numel();
  require_aligned(targets.size(), n, "sigmoid_focal_loss", "targets");
  require_aligned(weights.size(), n, "sigmoid_focal_loss", "weights");
  auto z = logits.data();
  auto dz = std::make_shared<std::vector<double>>(n, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (weights[i] == 0.0) {
      continue;
    }
    const double p = stable_sigmoid(z[i]);
    const double q = 1.0 - p;
    const double log_p = -softplus(-z[i]);
    const double log_q = -softplus(z[i]);
    const double t = targets[i];
    const double q_g = std::pow(q, gamma);
    const double p_g = std::pow(p, gamma);
    const double pos = -alpha * q_g * log_p;
    const double neg = -(1.0 - alpha) * p_g * log_q;
    total += weights[i] * (t * pos + (1.0 - t) * neg);
    const double dpos = alpha * q_g * (gamma * p * log_p - q);
    const double dneg = (1.0 - alpha) * p_g * (p - gamma * q * log_q);
    (*dz)[i] = weights[i] * (t * dpos + (1.0 - t) * dneg);
  }
  auto out = Tensor::scalar(total);
  if (tape.should_record({&logits})) {
    tape.record(out, [logits, dz](std::span<const double> g) {
      double * gl = grad_of(logits);
      for (std::size_t i = 0; i < dz->size(); ++i) {
        gl[i] += g[0] * (*dz)[i];
      }
    });
  }
  return out;
}

Tensor binary_focal_loss(
  Tape & tape, const Tensor & probs, std::span<const double> targets,
  std::span<const double> weights, double alpha, double gamma, double eps)
{
  const std::size_t n = probs.numel();
  require_aligned(targets.size(), n, "binary_focal_loss", "targets");
  require_aligned(weights.size(), n, "binary_focal_loss", "weights");
  auto pv = probs.data();
  auto dp = std::make_shared<std::vector<double>>(n, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (weights[i] == 0.0) {
      continue;
    }
    const double p = pv[i];
    const double q = 1.0 - p;
    const double t = targets[i];
    const double log_p = std::log(std::max(p, eps));
    const double log_q = std::log(std::max(q, eps));
    const double dlog_p = p > eps ? 1.0 / p : 0.0;
    const double dlog_q = q > eps ? -1.0 / q : 0.0;
    const double q_g = std::pow(q, gamma);
    const double p_g = std::pow(p, gamma);
    const double dq_g = q > 0.0 ? -gamma * std::pow(q, gamma - 1.0) : 0.0;
    const double dp_g = p > 0.0 ? gamma * std::pow(p, gamma - 1.0) : 0.0;
    const double pos = -alpha * q_g * log_p;
    const double neg = -(1.0 - alpha) * p_g * log_q;
    total += weights[i] * (t * pos + (1.0 - t) * neg);
    const double dpos = -alpha * (dq_g * log_p + q_g * dlog_p);
    const double dneg = -(1.0 - alpha) * (dp_g * log_q + p_g * dlog_q);
    (*dp)[i] = weights[i] * (t * dpos + (1.0 - t) * dneg);
  }
  auto out = Tensor::scalar(total);
  if (tape.should_record({&probs})) {
    tape.record(out, [probs, dp](std::span<const double> g) {
      double * gp = grad_of(probs);
      for (std::size_t i = 0; i < dp->size(); ++i) {
        gp[i] += g[0] * (*dp)[i];
      }
    });
  }
  return out;
}

Tensor smooth_l1_loss(
  Tape & tape, const Tensor & pred, std::span<const double> target,
  std::span<const double> weights, double beta, std::span<const std::uint8_t> sine_mask)
{
  const std::size_t n = pred.numel();
  require_aligned(target.size(), n, "smooth_l1_loss", "target");
  require_aligned(weights.size(), n, "smooth_l1_loss", "weights");
  if (!sine_mask.empty()) {
    require_aligned(sine_mask.size(), n, "smooth_l1_loss", "sine_mask");
  }
  auto pv = pred.data();
  auto dpred = std::make_shared<std::vector<double>>(n, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (weights[i] == 0.0) {
      continue;
    }
    const double raw = pv[i] - target[i];
    const bool wrap = !sine_mask.empty() && sine_mask[i];
    const double d = wrap ? std::sin(raw) : raw;
    const double dd = wrap ? std::cos(raw) : 1.0;
    const double ad = std::abs(d);
    double loss;
    double slope;
    if (ad < beta) {
      loss = 0.5 * d * d / beta;
      slope = d / beta;
    } else {
      loss = ad - 0.5 * beta;
      slope = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
    }
    total += weights[i] * loss;
    (*dpred)[i] = weights[i] * slope * dd;
  }
  auto out = Tensor::scalar(total);
  if (tape.should_record({&pred})) {
    tape.record(out, [pred, dpred](std::span<const double> g) {
      double * gp = grad_of(pred);
      for (std::size_t i = 0; i < dpred->size(); ++i) {
        gp[i] += g[0] * (*dpred)[i];
      }
    });
  }
  return out;
}

}  // namespace fusionlab::tensor
