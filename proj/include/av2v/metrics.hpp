// Copyright (c) 2026 av2v contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <iosfwd>
#include <vector>

#include "av2v/media_io.hpp"
#include "av2v/tensor.hpp"

namespace av2v {

// Maps a [3,H,W] frame to an embedding vector. The built-in embedder
// mean-pools patch-codec features and L2-normalizes; anything with the same
// signature can be plugged in instead.
using Embedder = std::function<std::vector<double>(const Tensor& frame)>;

Embedder make_codec_embedder(const PatchCodec& codec);

// Mean cosine similarity over consecutive-frame embedding pairs, in [-1, 1].
// Zero-norm embeddings contribute similarity 0 (with a warning on `warnings`
// when provided, else stderr) instead of NaN. Requires at least two frames.
double frame_consistency(const FrameSequence& fs, const Embedder& embed,
                         std::vector<double>* per_pair = nullptr,
                         std::ostream* warnings = nullptr);

}  // namespace av2v
