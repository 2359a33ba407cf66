// Copyright (c) 2026 av2v contributors
// SPDX-License-Identifier: Apache-2.0

#include "av2v/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

namespace av2v {

Embedder make_codec_embedder(const PatchCodec& codec) {
  return [codec](const Tensor& frame) {
    const Tensor latent = codec.encode_frame(frame);
    const std::size_t c = latent.dim(0), plane = latent.dim(1) * latent.dim(2);
    std::vector<double> v(c, 0.0);
    for (std::size_t ci = 0; ci < c; ++ci) {
      double acc = 0.0;
      for (std::size_t p = 0; p < plane; ++p) acc += latent[ci * plane + p];
      v[ci] = acc / static_cast<double>(plane);
    }
    double norm_sq = 0.0;
    for (double x : v) norm_sq += x * x;
    if (norm_sq > 0.0) {
      const double inv = 1.0 / std::sqrt(norm_sq);
      for (double& x : v) x *= inv;
    }
    return v;
  };
}

double frame_consistency(const FrameSequence& fs, const Embedder& embed,
                         std::vector<double>* per_pair, std::ostream* warnings) {
  if (fs.frames.size() < 2) {
    throw MetricError("frame consistency needs at least 2 frames, got " +
                      std::to_string(fs.frames.size()));
  }
  std::ostream& warn = warnings != nullptr ? *warnings : std::cerr;

  std::vector<std::vector<double>> embeddings;
  embeddings.reserve(fs.frames.size());
  for (const Tensor& frame : fs.frames) {
    std::vector<double> e = embed(frame);
    for (double v : e) {
      if (!std::isfinite(v)) throw MetricError("embedder produced a non-finite value");
    }
    embeddings.push_back(std::move(e));
  }

  double sum = 0.0;
  const std::size_t pairs = embeddings.size() - 1;
  for (std::size_t i = 0; i < pairs; ++i) {
    const std::vector<double>& a = embeddings[i];
    const std::vector<double>& b = embeddings[i + 1];
    if (a.size() != b.size()) throw MetricError("embedder output length varies across frames");
    double dot = 0.0, aa = 0.0, bb = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) {
      dot += a[j] * b[j];
      aa += a[j] * a[j];
      bb += b[j] * b[j];
    }
    double cosine;
    if (aa == 0.0 || bb == 0.0) {
      warn << "frame_consistency: zero-norm embedding at pair " << i
           << "; counting similarity 0\n";
      cosine = 0.0;
    } else {
      cosine = dot / std::sqrt(aa * bb);
      cosine = std::clamp(cosine, -1.0, 1.0);
    }
    if (per_pair != nullptr) per_pair->push_back(cosine);
    sum += cosine;
  }
  return sum / static_cast<double>(pairs);
}

}  // namespace av2v
