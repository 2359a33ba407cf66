// Copyright (c) 2026 av2v contributors
// SPDX-License-Identifier: Apache-2.0

#include "av2v/tensor.hpp"

#include <cmath>
#include <cstring>
#include <sstream>

#include "av2v/parallel.hpp"
#include "av2v/rng.hpp"

namespace av2v {

namespace {

std::size_t checked_volume(const std::vector<std::size_t>& dims) {
  std::size_t n = 1;
  for (std::size_t d : dims) {
    if (d == 0) throw KernelError("tensor extents must be positive");
    n *= d;
  }
  return n;
}

void require_finite(const Tensor& t, const char* op) {
  if (!t.all_finite()) {
    throw KernelError(std::string(op) + ": non-finite input");
  }
}

void require_rank(const Tensor& t, std::size_t r, const char* op) {
  if (t.rank() != r) {
    throw KernelError(std::string(op) + ": expected rank " + std::to_string(r) +
                      ", got " + t.shape_string());
  }
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> dims)
    : dims_(std::move(dims)), data_(checked_volume(dims_), real(0)) {}

Tensor::Tensor(std::vector<std::size_t> dims, std::vector<real> data) : dims_(std::move(dims)) {
  if (checked_volume(dims_) != data.size()) {
    throw KernelError("tensor data length does not match extents");
  }
  data_ = std::move(data);
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::initializer_list<double> values) {
  std::vector<real> data;
  data.reserve(values.size());
  for (double v : values) data.push_back(static_cast<real>(v));
  return Tensor({rows, cols}, std::move(data));
}

bool Tensor::all_finite() const {
  for (real v : data_) {
    if (!std::isfinite(static_cast<double>(v))) return false;
  }
  return true;
}

bool Tensor::bit_equal(const Tensor& other) const {
  if (dims_ != other.dims_) return false;
  return std::memcmp(data_.data(), other.data_.data(), data_.size() * sizeof(real)) == 0;
}

std::string Tensor::shape_string() const {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < dims_.size(); ++i) {
    if (i) os << 'x';
    os << dims_[i];
  }
  os << ']';
  return os.str();
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  if (a.dim(1) != b.dim(0)) {
    throw KernelError("matmul: inner extents differ, " + a.shape_string() + " vs " +
                      b.shape_string());
  }
  require_finite(a, "matmul");
  require_finite(b, "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor out({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a.at(i, p);
      for (std::size_t j = 0; j < n; ++j) {
        out.at(i, j) += static_cast<real>(av * b.at(p, j));
      }
    }
  }
  return out;
}

Tensor softmax_rows(const Tensor& m) {
  require_rank(m, 2, "softmax_rows");
  require_finite(m, "softmax_rows");
  const std::size_t rows = m.dim(0), cols = m.dim(1);
  Tensor out({rows, cols});
  for (std::size_t i = 0; i < rows; ++i) {
    double rmax = m.at(i, 0);
    for (std::size_t j = 1; j < cols; ++j) rmax = std::max(rmax, static_cast<double>(m.at(i, j)));
    double sum = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      const double e = std::exp(static_cast<double>(m.at(i, j)) - rmax);
      out.at(i, j) = static_cast<real>(e);
      sum += e;
    }
    const double inv = 1.0 / sum;
    for (std::size_t j = 0; j < cols; ++j) {
      out.at(i, j) = static_cast<real>(static_cast<double>(out.at(i, j)) * inv);
    }
  }
  return out;
}

Tensor scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                            Tensor* scores_out) {
  require_rank(q, 2, "scaled_dot_attention");
  require_rank(k, 2, "scaled_dot_attention");
  require_rank(v, 2, "scaled_dot_attention");
  if (!q.same_shape(k) || !q.same_shape(v)) {
    throw KernelError("scaled_dot_attention: Q/K/V shapes differ: " + q.shape_string() + ", " +
                      k.shape_string() + ", " + v.shape_string());
  }
  if (q.dim(1) < 1) throw KernelError("scaled_dot_attention: head dim must be >= 1");
  require_finite(q, "scaled_dot_attention");
  require_finite(k, "scaled_dot_attention");
  require_finite(v, "scaled_dot_attention");

  const std::size_t n = q.dim(0), d = q.dim(1);
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  Tensor logits({n, n});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < d; ++p) {
        acc += static_cast<double>(q.at(i, p)) * static_cast<double>(k.at(j, p));
      }
      logits.at(i, j) = static_cast<real>(acc * scale);
    }
  }
  Tensor scores = softmax_rows(logits);
  Tensor out = matmul(scores, v);
  if (scores_out != nullptr) *scores_out = std::move(scores);
  return out;
}

namespace {

Tensor conv2d_impl(const Tensor& x, const Tensor& kernel, int stride, const char* op) {
  require_rank(x, 3, op);
  require_rank(kernel, 4, op);
  if (kernel.dim(2) != 3 || kernel.dim(3) != 3) {
    throw KernelError(std::string(op) + ": kernel window must be 3x3");
  }
  if (kernel.dim(1) != x.dim(0)) {
    throw KernelError(std::string(op) + ": input channels " + std::to_string(x.dim(0)) +
                      " do not match kernel channels " + std::to_string(kernel.dim(1)));
  }
  require_finite(x, op);
  require_finite(kernel, op);

  const std::size_t cin = x.dim(0), h = x.dim(1), w = x.dim(2);
  const std::size_t cout = kernel.dim(0);
  const std::size_t oh = (h + static_cast<std::size_t>(stride) - 1) / stride;
  const std::size_t ow = (w + static_cast<std::size_t>(stride) - 1) / stride;
  Tensor out({cout, oh, ow});

  // Each output channel is computed independently with a fixed accumulation
  // order, so partitioning over channels cannot change any result bit.
  // Below ~4M multiply-accumulates the thread spawn costs more than it saves.
  const std::size_t work = cout * oh * ow * cin * 9;
  auto compute = [&](std::size_t c0, std::size_t c1) {
    for (std::size_t co = c0; co < c1; ++co) {
      for (std::size_t oy = 0; oy < oh; ++oy) {
        for (std::size_t ox = 0; ox < ow; ++ox) {
          const std::ptrdiff_t iy0 = static_cast<std::ptrdiff_t>(oy) * stride - 1;
          const std::ptrdiff_t ix0 = static_cast<std::ptrdiff_t>(ox) * stride - 1;
          double acc = 0.0;
          for (std::size_t ci = 0; ci < cin; ++ci) {
            for (int dy = 0; dy < 3; ++dy) {
              const std::ptrdiff_t iy = iy0 + dy;
              if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
              for (int dx = 0; dx < 3; ++dx) {
                const std::ptrdiff_t ix = ix0 + dx;
                if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
                acc += static_cast<double>(
                           x.at(ci, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix))) *
                       static_cast<double>(kernel.at(co, ci, static_cast<std::size_t>(dy),
                                                     static_cast<std::size_t>(dx)));
              }
            }
          }
          out.at(co, oy, ox) = static_cast<real>(acc);
        }
      }
    }
  };
  if (work < (std::size_t(1) << 22)) {
    compute(0, cout);
  } else {
    parallel_for(cout, compute);
  }
  return out;
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& kernel) {
  return conv2d_impl(x, kernel, 1, "conv2d");
}

Tensor conv2d_strided(const Tensor& x, const Tensor& kernel, int stride) {
  if (stride < 1) throw KernelError("conv2d_strided: stride must be >= 1");
  return conv2d_impl(x, kernel, stride, "conv2d_strided");
}

Tensor group_normalize(const Tensor& x, int groups, std::span<const real> gain,
                       std::span<const real> bias, double eps) {
  require_rank(x, 3, "group_normalize");
  require_finite(x, "group_normalize");
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  if (groups < 1 || c % static_cast<std::size_t>(groups) != 0) {
    throw ConfigError("group_normalize: " + std::to_string(c) + " channels not divisible by " +
                      std::to_string(groups) + " groups");
  }
  if (gain.size() != c || bias.size() != c) {
    throw KernelError("group_normalize: gain/bias length must equal channel count");
  }
  if (!(eps > 0.0)) throw ConfigError("group_normalize: eps must be positive");

  const std::size_t per_group = c / static_cast<std::size_t>(groups);
  const std::size_t plane = h * w;
  Tensor out({c, h, w});
  for (int g = 0; g < groups; ++g) {
    const std::size_t c_begin = static_cast<std::size_t>(g) * per_group;
    const std::size_t c_end = c_begin + per_group;
    double mean = 0.0;
    for (std::size_t ci = c_begin; ci < c_end; ++ci) {
      for (std::size_t p = 0; p < plane; ++p) mean += x[ci * plane + p];
    }
    const double count = static_cast<double>(per_group * plane);
    mean /= count;
    double var = 0.0;
    for (std::size_t ci = c_begin; ci < c_end; ++ci) {
      for (std::size_t p = 0; p < plane; ++p) {
        const double d = static_cast<double>(x[ci * plane + p]) - mean;
        var += d * d;
      }
    }
    var /= count;  // biased estimator
    const double inv_std = 1.0 / std::sqrt(var + eps);
    for (std::size_t ci = c_begin; ci < c_end; ++ci) {
      const double gn = gain[ci], bs = bias[ci];
      for (std::size_t p = 0; p < plane; ++p) {
        const double norm = (static_cast<double>(x[ci * plane + p]) - mean) * inv_std;
        out[ci * plane + p] = static_cast<real>(norm * gn + bs);
      }
    }
  }
  return out;
}

Tensor lin_combine(double a, const Tensor& x, double b, const Tensor& y) {
  if (!x.same_shape(y)) {
    throw KernelError("lin_combine: shapes differ: " + x.shape_string() + " vs " +
                      y.shape_string());
  }
  Tensor out(x.dims());
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = static_cast<real>(a * static_cast<double>(x[i]) + b * static_cast<double>(y[i]));
  }
  return out;
}

std::uint64_t tensor_checksum(const Tensor& t) {
  std::uint64_t h = fnv1a64(t.data(), t.size() * sizeof(real));
  for (std::size_t d : t.dims()) {
    h = fnv1a64(&d, sizeof(d), h);
  }
  return h;
}

}  // namespace av2v
