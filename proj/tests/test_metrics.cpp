// Copyright (c) 2026 av2v contributors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "av2v/metrics.hpp"
#include "test_util.hpp"

using av2v::Embedder;
using av2v::FrameSequence;
using av2v::PatchCodec;
using av2v::Tensor;
using test_util::random_tensor;

namespace {

FrameSequence frames_of(std::vector<Tensor> frames) {
  FrameSequence fseq;
  fseq.frames = std::move(frames);
  return fseq;
}

Tensor constant_frame(double v, std::size_t h = 4, std::size_t w = 4) {
  Tensor f({3, h, w});
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = static_cast<av2v::real>(v);
  return f;
}

// Test embedder keyed on the frame's first pixel value.
Embedder table_embedder(std::vector<std::vector<double>> table) {
  return [table = std::move(table)](const Tensor& frame) {
    const auto idx = static_cast<std::size_t>(std::lround(static_cast<double>(frame[0])));
    return table.at(idx);
  };
}

}  // namespace

TEST_CASE("constant video scores exactly 1.0") {
  const PatchCodec codec(2, 0);
  const Embedder emb = av2v::make_codec_embedder(codec);
  Tensor frame = random_tensor({3, 4, 4}, 1, 0.2);
  for (std::size_t i = 0; i < frame.size(); ++i) frame[i] = av2v::real(0.5 + frame[i]);
  const FrameSequence fseq = frames_of({frame, frame, frame, frame});
  CHECK(av2v::frame_consistency(fseq, emb) == 1.0);
}

TEST_CASE("orthogonal embeddings score 0") {
  const Embedder emb = table_embedder({{1.0, 0.0}, {0.0, 1.0}});
  const FrameSequence fseq = frames_of({constant_frame(0.0), constant_frame(1.0)});
  CHECK(av2v::frame_consistency(fseq, emb) == 0.0);
}

TEST_CASE("three-frame fixture averages the pairwise cosines") {
  // cos(e0,e1) = 1, cos(e1,e2) = 0.5 -> mean 0.75
  const Embedder emb = table_embedder({
      {1.0, 0.0},
      {1.0, 0.0},
      {0.5, std::sqrt(3.0) / 2.0},
  });
  const FrameSequence fseq =
      frames_of({constant_frame(0.0), constant_frame(1.0), constant_frame(2.0)});
  std::vector<double> per_pair;
  const double score = av2v::frame_consistency(fseq, emb, &per_pair);
  CHECK(std::abs(score - 0.75) <= 1e-12);
  REQUIRE(per_pair.size() == 2);
  CHECK(std::abs(per_pair[0] - 1.0) <= 1e-12);
  CHECK(std::abs(per_pair[1] - 0.5) <= 1e-12);
}

TEST_CASE("reversal invariance and range") {
  const PatchCodec codec(2, 0);
  const Embedder emb = av2v::make_codec_embedder(codec);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    FrameSequence fseq;
    for (int i = 0; i < 5; ++i) {
      Tensor f = random_tensor({3, 4, 4}, seed * 10 + i, 0.2);
      for (std::size_t j = 0; j < f.size(); ++j) f[j] = av2v::real(0.5 + f[j]);
      fseq.frames.push_back(std::move(f));
    }
    const double fwd = av2v::frame_consistency(fseq, emb);
    CHECK(fwd >= -1.0);
    CHECK(fwd <= 1.0);

    FrameSequence reversed;
    reversed.frames.assign(fseq.frames.rbegin(), fseq.frames.rend());
    CHECK(std::abs(av2v::frame_consistency(reversed, emb) - fwd) <= 1e-12);

    // Duplicating every frame inserts unit-similarity pairs.
    FrameSequence doubled;
    for (const Tensor& f : fseq.frames) {
      doubled.frames.push_back(f);
      doubled.frames.push_back(f);
    }
    CHECK(av2v::frame_consistency(doubled, emb) >= fwd - 1e-12);
  }
}

TEST_CASE("fewer than two frames is a metric error") {
  const Embedder emb = table_embedder({{1.0}});
  CHECK_THROWS_AS(av2v::frame_consistency(frames_of({constant_frame(0.0)}), emb),
                  av2v::MetricError);
  CHECK_THROWS_AS(av2v::frame_consistency(frames_of({}), emb), av2v::MetricError);
}

TEST_CASE("zero-norm embeddings contribute 0 with a warning") {
  const Embedder emb = table_embedder({{0.0, 0.0}, {1.0, 0.0}});
  std::ostringstream warnings;
  const double score = av2v::frame_consistency(
      frames_of({constant_frame(0.0), constant_frame(1.0)}), emb, nullptr, &warnings);
  CHECK(score == 0.0);
  CHECK(warnings.str().find("zero-norm") != std::string::npos);
}

TEST_CASE("non-finite embeddings are rejected") {
  const Embedder emb = [](const Tensor&) {
    return std::vector<double>{std::numeric_limits<double>::infinity()};
  };
  CHECK_THROWS_AS(
      av2v::frame_consistency(frames_of({constant_frame(0.0), constant_frame(1.0)}), emb),
      av2v::MetricError);
}

TEST_CASE("codec embedder normalizes and stays finite") {
  const PatchCodec codec(2, 7);
  const Embedder emb = av2v::make_codec_embedder(codec);
  const std::vector<double> e = emb(constant_frame(0.7));
  double norm = 0.0;
  for (double v : e) {
    CHECK(std::isfinite(v));
    norm += v * v;
  }
  CHECK(std::abs(norm - 1.0) < 1e-12);
  // The all-black frame embeds to the zero vector.
  const std::vector<double> z = emb(constant_frame(0.0));
  for (double v : z) CHECK(v == 0.0);
}
