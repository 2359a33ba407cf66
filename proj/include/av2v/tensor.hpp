// Copyright (c) 2026 av2v contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "av2v/error.hpp"

namespace av2v {

// Scalar storage type. Tests and all shipped tooling run at 64-bit; float
// storage exists only behind the AV2V_STORAGE_F32 build switch.
#ifdef AV2V_STORAGE_F32
using real = float;
#else
using real = double;
#endif

// Dense row-major array with runtime rank. Values are kept finite; kernels
// reject NaN/Inf at their boundaries.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> dims);
  Tensor(std::vector<std::size_t> dims, std::vector<real> data);

  static Tensor zeros(std::vector<std::size_t> dims) { return Tensor(std::move(dims)); }
  // Rank-2 helper used heavily by tests.
  static Tensor matrix(std::size_t rows, std::size_t cols, std::initializer_list<double> values);

  std::size_t rank() const { return dims_.size(); }
  const std::vector<std::size_t>& dims() const { return dims_; }
  std::size_t dim(std::size_t i) const { return dims_.at(i); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  real* data() { return data_.data(); }
  const real* data() const { return data_.data(); }

  real& operator[](std::size_t flat) { return data_[flat]; }
  real operator[](std::size_t flat) const { return data_[flat]; }

  real& at(std::size_t i, std::size_t j) { return data_[i * dims_[1] + j]; }
  real at(std::size_t i, std::size_t j) const { return data_[i * dims_[1] + j]; }
  real& at(std::size_t i, std::size_t j, std::size_t k) {
    return data_[(i * dims_[1] + j) * dims_[2] + k];
  }
  real at(std::size_t i, std::size_t j, std::size_t k) const {
    return data_[(i * dims_[1] + j) * dims_[2] + k];
  }
  real& at(std::size_t i, std::size_t j, std::size_t k, std::size_t l) {
    return data_[((i * dims_[1] + j) * dims_[2] + k) * dims_[3] + l];
  }
  real at(std::size_t i, std::size_t j, std::size_t k, std::size_t l) const {
    return data_[((i * dims_[1] + j) * dims_[2] + k) * dims_[3] + l];
  }

  bool same_shape(const Tensor& other) const { return dims_ == other.dims_; }
  bool all_finite() const;

  // Bitwise comparison (shape plus payload bytes).
  bool bit_equal(const Tensor& other) const;

  std::string shape_string() const;

 private:
  std::vector<std::size_t> dims_;
  std::vector<real> data_;
};

// Video latents are rank-4 tensors laid out [frames, channels, height, width].
using VideoLatent = Tensor;

// ---- dense kernels ---------------------------------------------------------
// All kernels are pure functions of their inputs and bit-reproducible in
// sequential mode; the parallel paths partition independent outputs only.

// [m,k] x [k,n] -> [m,n]
Tensor matmul(const Tensor& a, const Tensor& b);

// Row-wise softmax of a rank-2 tensor, stabilized by row-max subtraction.
Tensor softmax_rows(const Tensor& m);

// softmax(Q K^T / sqrt(d)) V for [n_tok, d] operands. When scores_out is
// non-null the [n_tok, n_tok] attention matrix is written there.
Tensor scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                            Tensor* scores_out = nullptr);

// Same-padded 3x3 cross-correlation: x [C_in,H,W], kernel [C_out,C_in,3,3].
Tensor conv2d(const Tensor& x, const Tensor& kernel);

// Strided variant used for downsampling inside the denoiser.
Tensor conv2d_strided(const Tensor& x, const Tensor& kernel, int stride);

// Per-group standardization of x [C,H,W] followed by per-channel affine.
Tensor group_normalize(const Tensor& x, int groups, std::span<const real> gain,
                       std::span<const real> bias, double eps);

// ---- small element-wise helpers --------------------------------------------

// a*x + b*y with identical shapes.
Tensor lin_combine(double a, const Tensor& x, double b, const Tensor& y);

// FNV-1a over the scalar payload's byte representation; test checksums.
std::uint64_t tensor_checksum(const Tensor& t);

}  // namespace av2v
