// Copyright (c) 2026 av2v contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "av2v/tensor.hpp"

namespace av2v {

// Compact image-to-video denoiser eps(z_t, first_frame, text, t): residual
// convolution blocks with spatial and temporal self-attention in an
// encoder-decoder layout. Feature hooks fire at every decoder layer so a
// caller can record features from one run and replace them in another.
struct UNetConfig {
  int in_channels = 16;        // latent channels of z_t
  int base_channels = 16;
  int depth = 2;               // resolution levels
  int decoder_layer_count = 12;
  int frames_nominal = 16;     // nominal training frame count, informational
  int head_dim = 32;
  int num_heads = 1;
  int text_embed_dim = 32;
  std::uint64_t seed = 0;

  void validate() const;
};

// Deterministic stand-in for a text encoder: the empty prompt maps to the
// all-zero vector, anything else hashes to a fixed gaussian vector.
std::vector<double> embed_text(const std::string& text, int dim);

struct ConditioningBundle {
  Tensor first_frame_latent;       // [C,H,W]
  std::vector<double> text_embed;  // length text_embed_dim
  bool is_null = true;             // true iff text_embed is exactly zero
};

ConditioningBundle make_conditioning(Tensor first_frame_latent, const std::string& text, int dim);

enum class FeatureKind { conv_f, spatial_q, spatial_k, temporal_q, temporal_k };

const char* feature_kind_name(FeatureKind kind);
std::optional<FeatureKind> feature_kind_from_name(std::string_view name);

enum class AttentionSite { spatial, temporal };

// Per-site callback protocol. on_feature receives the feature tensor by
// mutable reference; whatever is left in `value` is what the forward pass
// continues with, so overwriting it performs an injection. Hooks fire only
// at decoder layers, in execution order, at three sites per layer:
//   conv_f      residual-block conv output, before the skip connection,
//               shaped [F, C, H, W]
//   spatial_q/k per-frame attention projections, shaped [F, H*W, heads*d]
//   temporal_q/k per-position attention projections, shaped [H*W, F, heads*d]
class FeatureHooks {
 public:
  virtual ~FeatureHooks() = default;
  virtual void on_feature(FeatureKind kind, int layer, Tensor& value) = 0;
  // Opt-in delivery of post-softmax attention scores, averaged across heads
  // (spatial: [F, n, n]; temporal: [H*W, F, F]).
  virtual bool wants_attention_scores() const { return false; }
  virtual void on_attention_scores(AttentionSite /*site*/, int /*layer*/,
                                   const Tensor& /*scores*/) {}
};

// Token reshapes shared by the attention blocks and tests.
Tensor spatial_tokens(const Tensor& hidden);  // [F,C,H,W] -> [F, H*W, C]
Tensor spatial_untokens(const Tensor& tokens, std::size_t h, std::size_t w);
Tensor temporal_tokens(const Tensor& hidden);  // [F,C,H,W] -> [H*W, F, C]
Tensor temporal_untokens(const Tensor& tokens, std::size_t h, std::size_t w);

class UNet {
 public:
  explicit UNet(const UNetConfig& config);
  ~UNet();
  UNet(UNet&&) noexcept;
  UNet& operator=(UNet&&) noexcept;
  UNet(const UNet&) = delete;
  UNet& operator=(const UNet&) = delete;

  const UNetConfig& config() const;

  // Resolution level of a decoder layer (0 = full latent resolution).
  // Layers are indexed in execution order, deepest level first.
  int decoder_layer_level(int layer) const;

  // Predicts eps with the same shape as z. Frame count is free (>= 2);
  // spatial extents must be divisible by 2^(depth-1).
  VideoLatent forward(const VideoLatent& z, const ConditioningBundle& cond, int t,
                      FeatureHooks* hooks = nullptr) const;

  // All parameters with stable names, in initialization order.
  std::vector<std::pair<std::string, const Tensor*>> parameters() const;

  // One tensor file per parameter under dir; load validates names/shapes.
  void save_weights(const std::string& dir) const;
  void load_weights(const std::string& dir);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace av2v
