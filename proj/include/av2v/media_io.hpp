// Copyright (c) 2026 av2v contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "av2v/tensor.hpp"

namespace av2v {

// A pixel video: frames are [3, H_px, W_px] tensors with values in [0, 1].
struct FrameSequence {
  std::vector<Tensor> frames;
  double frame_rate = 0.0;  // informational only
};

// Deterministic invertible pixel<->latent map. Non-overlapping patch x patch
// blocks are projected through a seeded orthogonal matrix, so
// decode(encode(x)) == x up to rounding. Latent channel count is 3*patch^2.
class PatchCodec {
 public:
  explicit PatchCodec(int patch = 8, std::uint64_t seed = 0);

  int patch() const { return patch_; }
  int latent_channels() const { return latent_channels_; }
  const Tensor& projection() const { return projection_; }

  Tensor encode_frame(const Tensor& frame) const;   // [3,H,W] -> [C,h,w]
  Tensor decode_frame(const Tensor& latent) const;  // [C,h,w] -> [3,H,W]

  VideoLatent encode_video(const FrameSequence& fs) const;   // -> [n,C,h,w]
  FrameSequence decode_video(const VideoLatent& z) const;    // unclamped

 private:
  int patch_;
  int latent_channels_;
  Tensor projection_;  // [3p^2, 3p^2], orthogonal
};

// Tensor file format: magic "AV2V", version u32 LE, rank u32 LE, extents as
// u32 LE each, then the payload as little-endian IEEE-754 f64, row-major.
void write_tensor(const std::string& path, const Tensor& t);
Tensor read_tensor(const std::string& path);

// In-memory codec for the same byte layout (used by file IO and tests).
std::vector<std::uint8_t> encode_tensor_bytes(const Tensor& t);
Tensor decode_tensor_bytes(const std::vector<std::uint8_t>& bytes);

// Frame directories hold binary portable pixmaps (P6, maxval 255) whose
// lexicographic name order is the temporal order. write_frames emits
// frame_%04d.ppm and quantizes (with clamping) to 8 bits.
FrameSequence read_frames(const std::string& dir);
void write_frames(const std::string& dir, const FrameSequence& fs);

Tensor read_ppm(const std::string& path);
void write_ppm(const std::string& path, const Tensor& frame);

// 8-bit grayscale pixmap (P5) of a [H,W] tensor, min/max normalized;
// used for feature visualization exports.
void write_pgm(const std::string& path, const Tensor& image);

}  // namespace av2v
