// Copyright (c) 2026 av2v contributors
// SPDX-License-Identifier: Apache-2.0

#include "av2v/unet.hpp"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <functional>

#include "av2v/media_io.hpp"
#include "av2v/rng.hpp"

namespace fs = std::filesystem;

namespace av2v {

namespace {

constexpr double kGnEps = 1e-5;

int groups_for(std::size_t channels) {
  for (int g : {8, 4, 2}) {
    if (channels % static_cast<std::size_t>(g) == 0) return g;
  }
  return 1;
}

double silu(double x) { return x / (1.0 + std::exp(-x)); }

Tensor silu_all(const Tensor& x) {
  Tensor out(x.dims());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = static_cast<real>(silu(x[i]));
  return out;
}

std::vector<double> silu_vec(const std::vector<double>& v) {
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = silu(v[i]);
  return out;
}

Tensor frame_slice(const Tensor& video, std::size_t f) {
  const std::size_t per = video.size() / video.dim(0);
  Tensor out(std::vector<std::size_t>(video.dims().begin() + 1, video.dims().end()));
  std::memcpy(out.data(), video.data() + f * per, per * sizeof(real));
  return out;
}

void frame_assign(Tensor& video, std::size_t f, const Tensor& frame) {
  const std::size_t per = video.size() / video.dim(0);
  std::memcpy(video.data() + f * per, frame.data(), per * sizeof(real));
}

}  // namespace

// ---- token reshapes ----------------------------------------------------------

Tensor spatial_tokens(const Tensor& hidden) {
  if (hidden.rank() != 4) {
    throw KernelError("spatial_tokens: expected rank-4 input, got " + hidden.shape_string());
  }
  const std::size_t f = hidden.dim(0), c = hidden.dim(1), h = hidden.dim(2), w = hidden.dim(3);
  Tensor out({f, h * w, c});
  for (std::size_t fi = 0; fi < f; ++fi) {
    for (std::size_t ci = 0; ci < c; ++ci) {
      for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
          out.at(fi, y * w + x, ci) = hidden.at(fi, ci, y, x);
        }
      }
    }
  }
  return out;
}

Tensor spatial_untokens(const Tensor& tokens, std::size_t h, std::size_t w) {
  if (tokens.rank() != 3 || tokens.dim(1) != h * w) {
    throw KernelError("spatial_untokens: token shape " + tokens.shape_string() +
                      " does not match " + std::to_string(h) + "x" + std::to_string(w));
  }
  const std::size_t f = tokens.dim(0), c = tokens.dim(2);
  Tensor out({f, c, h, w});
  for (std::size_t fi = 0; fi < f; ++fi) {
    for (std::size_t ci = 0; ci < c; ++ci) {
      for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
          out.at(fi, ci, y, x) = tokens.at(fi, y * w + x, ci);
        }
      }
    }
  }
  return out;
}

Tensor temporal_tokens(const Tensor& hidden) {
  if (hidden.rank() != 4) {
    throw KernelError("temporal_tokens: expected rank-4 input, got " + hidden.shape_string());
  }
  if (hidden.dim(0) < 2) {
    throw KernelError("temporal_tokens: need at least 2 frames");
  }
  const std::size_t f = hidden.dim(0), c = hidden.dim(1), h = hidden.dim(2), w = hidden.dim(3);
  Tensor out({h * w, f, c});
  for (std::size_t fi = 0; fi < f; ++fi) {
    for (std::size_t ci = 0; ci < c; ++ci) {
      for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
          out.at(y * w + x, fi, ci) = hidden.at(fi, ci, y, x);
        }
      }
    }
  }
  return out;
}

Tensor temporal_untokens(const Tensor& tokens, std::size_t h, std::size_t w) {
  if (tokens.rank() != 3 || tokens.dim(0) != h * w) {
    throw KernelError("temporal_untokens: token shape " + tokens.shape_string() +
                      " does not match " + std::to_string(h) + "x" + std::to_string(w));
  }
  const std::size_t f = tokens.dim(1), c = tokens.dim(2);
  Tensor out({f, c, h, w});
  for (std::size_t fi = 0; fi < f; ++fi) {
    for (std::size_t ci = 0; ci < c; ++ci) {
      for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
          out.at(fi, ci, y, x) = tokens.at(y * w + x, fi, ci);
        }
      }
    }
  }
  return out;
}

// ---- config / conditioning ---------------------------------------------------

void UNetConfig::validate() const {
  if (in_channels < 1) throw ConfigError("in_channels must be >= 1");
  if (base_channels < 1) throw ConfigError("base_channels must be >= 1");
  if (depth < 1) throw ConfigError("depth must be >= 1");
  if (decoder_layer_count < 2) throw ConfigError("decoder_layer_count must be >= 2");
  if (decoder_layer_count < depth) {
    throw ConfigError("decoder_layer_count must be >= depth so every level owns a layer");
  }
  if (frames_nominal < 2) throw ConfigError("frames_nominal must be >= 2");
  if (head_dim < 1) throw ConfigError("head_dim must be >= 1");
  if (num_heads < 1) throw ConfigError("num_heads must be >= 1");
  if (text_embed_dim < 1) throw ConfigError("text_embed_dim must be >= 1");
}

std::vector<double> embed_text(const std::string& text, int dim) {
  std::vector<double> out(static_cast<std::size_t>(dim), 0.0);
  if (text.empty()) return out;  // the null prompt
  SeededRng rng(fnv1a64(text));
  const double scale = 1.0 / std::sqrt(static_cast<double>(dim));
  for (double& v : out) v = rng.gaussian() * scale;
  return out;
}

ConditioningBundle make_conditioning(Tensor first_frame_latent, const std::string& text, int dim) {
  ConditioningBundle cond;
  cond.first_frame_latent = std::move(first_frame_latent);
  cond.text_embed = embed_text(text, dim);
  cond.is_null = text.empty();
  return cond;
}

const char* feature_kind_name(FeatureKind kind) {
  switch (kind) {
    case FeatureKind::conv_f: return "conv_f";
    case FeatureKind::spatial_q: return "spatial_q";
    case FeatureKind::spatial_k: return "spatial_k";
    case FeatureKind::temporal_q: return "temporal_q";
    case FeatureKind::temporal_k: return "temporal_k";
  }
  return "?";
}

std::optional<FeatureKind> feature_kind_from_name(std::string_view name) {
  if (name == "conv_f") return FeatureKind::conv_f;
  if (name == "spatial_q") return FeatureKind::spatial_q;
  if (name == "spatial_k") return FeatureKind::spatial_k;
  if (name == "temporal_q") return FeatureKind::temporal_q;
  if (name == "temporal_k") return FeatureKind::temporal_k;
  return std::nullopt;
}

// ---- parameter blocks --------------------------------------------------------

namespace {

struct ConvParam {
  Tensor w;  // [Cout, Cin, 3, 3]
  Tensor b;  // [Cout]
};

struct LinParam {
  Tensor w;  // [out, in]
  Tensor b;  // [out]
};

struct GnParam {
  Tensor gain;  // [C]
  Tensor bias;  // [C]
};

struct ResBlockParam {
  GnParam gn1;
  ConvParam conv1;
  LinParam temb;  // [Cout, temb_dim]
  GnParam gn2;
  ConvParam conv2;
  Tensor shortcut;  // [Cout, Cin] 1x1 projection; empty when Cin == Cout
};

struct AttnParam {
  GnParam gn;
  Tensor wq, wk, wv;  // [C, heads*d], heads folded into the projection width
  Tensor wo;          // [heads*d, C]
};

struct DecoderLayerParam {
  ResBlockParam res;
  AttnParam sattn;
  AttnParam tattn;
};

class WeightInit {
 public:
  explicit WeightInit(std::uint64_t seed) : rng_(seed) {}

  Tensor gaussian(std::vector<std::size_t> dims, std::size_t fan_in) {
    Tensor t(std::move(dims));
    const double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<real>(rng_.gaussian() * scale);
    return t;
  }

  ConvParam conv(std::size_t cout, std::size_t cin) {
    return {gaussian({cout, cin, 3, 3}, cin * 9), Tensor({cout})};
  }

  LinParam linear(std::size_t out, std::size_t in) {
    return {gaussian({out, in}, in), Tensor({out})};
  }

  GnParam gn(std::size_t c) {
    GnParam p{Tensor({c}), Tensor({c})};
    for (std::size_t i = 0; i < c; ++i) p.gain[i] = real(1);
    return p;
  }

  ResBlockParam res_block(std::size_t cin, std::size_t cout, std::size_t temb_dim) {
    ResBlockParam p;
    p.gn1 = gn(cin);
    p.conv1 = conv(cout, cin);
    p.temb = linear(cout, temb_dim);
    p.gn2 = gn(cout);
    p.conv2 = conv(cout, cout);
    if (cin != cout) p.shortcut = gaussian({cout, cin}, cin);
    return p;
  }

  AttnParam attn(std::size_t c, std::size_t d, std::size_t heads) {
    AttnParam p;
    p.gn = gn(c);
    p.wq = gaussian({c, heads * d}, c);
    p.wk = gaussian({c, heads * d}, c);
    p.wv = gaussian({c, heads * d}, c);
    p.wo = gaussian({heads * d, c}, heads * d);
    return p;
  }

 private:
  SeededRng rng_;
};

}  // namespace

// ---- model -------------------------------------------------------------------

struct UNet::Impl {
  UNetConfig config;

  std::vector<std::size_t> widths;      // channel width per level
  std::vector<int> decoder_counts;      // decoder layers per level (index = level)
  std::size_t temb_dim = 0;

  ConvParam input_conv;
  LinParam temb_lin1, temb_lin2;
  Tensor text_proj;  // [temb_dim, text_dim]

  std::vector<ResBlockParam> enc_res;  // one per level
  std::vector<ConvParam> down;         // between levels, stride 2

  ResBlockParam mid_res;
  AttnParam mid_sattn, mid_tattn;

  std::vector<DecoderLayerParam> dec_layers;  // execution order
  std::vector<ConvParam> up;                  // one per level > 0, applied after its layers

  GnParam out_gn;
  ConvParam out_conv;

  explicit Impl(const UNetConfig& cfg) : config(cfg) {
    config.validate();
    const std::size_t depth = static_cast<std::size_t>(config.depth);
    widths.resize(depth);
    for (std::size_t i = 0; i < depth; ++i) {
      widths[i] = static_cast<std::size_t>(config.base_channels) << std::min<std::size_t>(i, 3);
    }
    // Spread decoder layers across levels, deepest levels first.
    decoder_counts.assign(depth, config.decoder_layer_count / config.depth);
    int extra = config.decoder_layer_count % config.depth;
    for (std::size_t i = depth; i-- > 0 && extra > 0;) {
      decoder_counts[i] += 1;
      --extra;
    }
    temb_dim = static_cast<std::size_t>(4 * config.base_channels);
    if (temb_dim % 2 != 0) temb_dim += 1;

    WeightInit init(config.seed);
    const std::size_t cin = static_cast<std::size_t>(config.in_channels);
    const std::size_t d = static_cast<std::size_t>(config.head_dim);
    const std::size_t heads = static_cast<std::size_t>(config.num_heads);

    input_conv = init.conv(widths[0], 2 * cin);
    temb_lin1 = init.linear(temb_dim, temb_dim);
    temb_lin2 = init.linear(temb_dim, temb_dim);
    text_proj = init.gaussian({temb_dim, static_cast<std::size_t>(config.text_embed_dim)},
                              static_cast<std::size_t>(config.text_embed_dim));

    for (std::size_t lv = 0; lv < depth; ++lv) {
      enc_res.push_back(init.res_block(widths[lv], widths[lv], temb_dim));
      if (lv + 1 < depth) down.push_back(init.conv(widths[lv + 1], widths[lv]));
    }

    mid_res = init.res_block(widths[depth - 1], widths[depth - 1], temb_dim);
    mid_sattn = init.attn(widths[depth - 1], d, heads);
    mid_tattn = init.attn(widths[depth - 1], d, heads);

    up.resize(depth);  // up[lv] valid for lv >= 1
    for (std::size_t lv = depth; lv-- > 0;) {
      for (int j = 0; j < decoder_counts[lv]; ++j) {
        const std::size_t in_ch = j == 0 ? 2 * widths[lv] : widths[lv];
        DecoderLayerParam layer;
        layer.res = init.res_block(in_ch, widths[lv], temb_dim);
        layer.sattn = init.attn(widths[lv], d, heads);
        layer.tattn = init.attn(widths[lv], d, heads);
        dec_layers.push_back(std::move(layer));
      }
      if (lv > 0) up[lv] = init.conv(widths[lv - 1], widths[lv]);
    }

    out_gn = init.gn(widths[0]);
    out_conv = init.conv(cin, widths[0]);
  }

  // -- forward helpers --

  Tensor conv_video(const Tensor& x, const ConvParam& p, int stride) const {
    const std::size_t f = x.dim(0);
    const std::size_t cout = p.w.dim(0);
    Tensor first = conv2d_strided(frame_slice(x, 0), p.w, stride);
    Tensor out({f, cout, first.dim(1), first.dim(2)});
    add_bias(first, p.b);
    frame_assign(out, 0, first);
    for (std::size_t fi = 1; fi < f; ++fi) {
      Tensor y = conv2d_strided(frame_slice(x, fi), p.w, stride);
      add_bias(y, p.b);
      frame_assign(out, fi, y);
    }
    return out;
  }

  static void add_bias(Tensor& chw, const Tensor& bias) {
    const std::size_t c = chw.dim(0), plane = chw.dim(1) * chw.dim(2);
    for (std::size_t ci = 0; ci < c; ++ci) {
      const real b = bias[ci];
      for (std::size_t p = 0; p < plane; ++p) chw[ci * plane + p] += b;
    }
  }

  Tensor gn_video(const Tensor& x, const GnParam& p) const {
    const std::size_t f = x.dim(0);
    Tensor out(x.dims());
    const int groups = groups_for(x.dim(1));
    for (std::size_t fi = 0; fi < f; ++fi) {
      Tensor y = group_normalize(frame_slice(x, fi), groups,
                                 std::span<const real>(p.gain.data(), p.gain.size()),
                                 std::span<const real>(p.bias.data(), p.bias.size()), kGnEps);
      frame_assign(out, fi, y);
    }
    return out;
  }

  static Tensor conv1x1_video(const Tensor& x, const Tensor& w) {
    const std::size_t f = x.dim(0), cin = x.dim(1), h = x.dim(2), wd = x.dim(3);
    const std::size_t cout = w.dim(0);
    const std::size_t plane = h * wd;
    Tensor out({f, cout, h, wd});
    for (std::size_t fi = 0; fi < f; ++fi) {
      for (std::size_t co = 0; co < cout; ++co) {
        for (std::size_t p = 0; p < plane; ++p) {
          double acc = 0.0;
          for (std::size_t ci = 0; ci < cin; ++ci) {
            acc += static_cast<double>(w.at(co, ci)) * x[(fi * cin + ci) * plane + p];
          }
          out[(fi * cout + co) * plane + p] = static_cast<real>(acc);
        }
      }
    }
    return out;
  }

  static Tensor upsample_nearest2(const Tensor& x) {
    const std::size_t f = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    Tensor out({f, c, 2 * h, 2 * w});
    for (std::size_t fi = 0; fi < f; ++fi) {
      for (std::size_t ci = 0; ci < c; ++ci) {
        for (std::size_t y = 0; y < h; ++y) {
          for (std::size_t xx = 0; xx < w; ++xx) {
            const real v = x.at(fi, ci, y, xx);
            out.at(fi, ci, 2 * y, 2 * xx) = v;
            out.at(fi, ci, 2 * y, 2 * xx + 1) = v;
            out.at(fi, ci, 2 * y + 1, 2 * xx) = v;
            out.at(fi, ci, 2 * y + 1, 2 * xx + 1) = v;
          }
        }
      }
    }
    return out;
  }

  static Tensor concat_channels(const Tensor& a, const Tensor& b) {
    const std::size_t f = a.dim(0), h = a.dim(2), w = a.dim(3);
    Tensor out({f, a.dim(1) + b.dim(1), h, w});
    const std::size_t plane = h * w;
    for (std::size_t fi = 0; fi < f; ++fi) {
      std::memcpy(out.data() + (fi * out.dim(1)) * plane, a.data() + fi * a.dim(1) * plane,
                  a.dim(1) * plane * sizeof(real));
      std::memcpy(out.data() + (fi * out.dim(1) + a.dim(1)) * plane,
                  b.data() + fi * b.dim(1) * plane, b.dim(1) * plane * sizeof(real));
    }
    return out;
  }

  std::vector<double> timestep_embedding(int t) const {
    const std::size_t half = temb_dim / 2;
    std::vector<double> e(temb_dim);
    for (std::size_t i = 0; i < half; ++i) {
      const double freq =
          std::exp(-std::log(10000.0) * static_cast<double>(i) / static_cast<double>(half));
      e[i] = std::sin(t * freq);
      e[half + i] = std::cos(t * freq);
    }
    return e;
  }

  static std::vector<double> lin_apply(const LinParam& p, const std::vector<double>& v) {
    const std::size_t out_dim = p.w.dim(0), in_dim = p.w.dim(1);
    std::vector<double> out(out_dim);
    for (std::size_t i = 0; i < out_dim; ++i) {
      double acc = p.b[i];
      for (std::size_t j = 0; j < in_dim; ++j) acc += static_cast<double>(p.w.at(i, j)) * v[j];
      out[i] = acc;
    }
    return out;
  }

  static void check_hook_shape(const Tensor& value, const std::vector<std::size_t>& dims,
                               FeatureKind kind, int layer) {
    if (value.dims() != dims) {
      throw PipelineError(std::string("injected ") + feature_kind_name(kind) + " at layer " +
                          std::to_string(layer) + " has shape " + value.shape_string() +
                          " but the site expects a different shape");
    }
  }

  Tensor res_apply(const ResBlockParam& p, const Tensor& x, const std::vector<double>& temb,
                   FeatureHooks* hooks, int layer) const {
    Tensor h = gn_video(x, p.gn1);
    h = silu_all(h);
    h = conv_video(h, p.conv1, 1);
    const std::vector<double> tproj = lin_apply(p.temb, temb);
    const std::size_t cout = h.dim(1), plane = h.dim(2) * h.dim(3);
    for (std::size_t fi = 0; fi < h.dim(0); ++fi) {
      for (std::size_t ci = 0; ci < cout; ++ci) {
        const real add = static_cast<real>(tproj[ci]);
        real* base = h.data() + (fi * cout + ci) * plane;
        for (std::size_t pp = 0; pp < plane; ++pp) base[pp] += add;
      }
    }
    h = gn_video(h, p.gn2);
    h = silu_all(h);
    h = conv_video(h, p.conv2, 1);
    if (hooks != nullptr && layer >= 0) {
      const std::vector<std::size_t> dims = h.dims();
      hooks->on_feature(FeatureKind::conv_f, layer, h);
      check_hook_shape(h, dims, FeatureKind::conv_f, layer);
    }
    Tensor sc = p.shortcut.empty() ? x : conv1x1_video(x, p.shortcut);
    return lin_combine(1.0, h, 1.0, sc);
  }

  Tensor attn_apply(const AttnParam& p, const Tensor& x, AttentionSite site, FeatureHooks* hooks,
                    int layer) const {
    const std::size_t h = x.dim(2), w = x.dim(3);
    Tensor g = gn_video(x, p.gn);
    Tensor toks = site == AttentionSite::spatial ? spatial_tokens(g) : temporal_tokens(g);
    const std::size_t batch = toks.dim(0), n = toks.dim(1), c = toks.dim(2);
    const std::size_t heads = static_cast<std::size_t>(config.num_heads);
    const std::size_t d = p.wq.dim(1) / heads;  // per-head width
    const std::size_t hd = p.wq.dim(1);

    auto project = [&](const Tensor& wmat) {
      Tensor out({batch, n, hd});
      for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t k = 0; k < hd; ++k) {
            double acc = 0.0;
            for (std::size_t cc = 0; cc < c; ++cc) {
              acc += static_cast<double>(toks.at(b, i, cc)) * wmat.at(cc, k);
            }
            out.at(b, i, k) = static_cast<real>(acc);
          }
        }
      }
      return out;
    };

    Tensor q = project(p.wq);
    Tensor k = project(p.wk);
    if (hooks != nullptr && layer >= 0) {
      const FeatureKind qk = site == AttentionSite::spatial ? FeatureKind::spatial_q
                                                            : FeatureKind::temporal_q;
      const FeatureKind kk = site == AttentionSite::spatial ? FeatureKind::spatial_k
                                                            : FeatureKind::temporal_k;
      const std::vector<std::size_t> dims = q.dims();
      hooks->on_feature(qk, layer, q);
      check_hook_shape(q, dims, qk, layer);
      hooks->on_feature(kk, layer, k);
      check_hook_shape(k, dims, kk, layer);
    }
    Tensor v = project(p.wv);

    const bool want_scores = hooks != nullptr && layer >= 0 && hooks->wants_attention_scores();
    Tensor mean_scores;
    if (want_scores) mean_scores = Tensor({batch, n, n});

    // Attention per head on column blocks of the folded projections.
    Tensor attended({batch, n, hd});
    Tensor qb({n, d}), kb({n, d}), vb({n, d});
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t head = 0; head < heads; ++head) {
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t kd = 0; kd < d; ++kd) {
            qb.at(i, kd) = q.at(b, i, head * d + kd);
            kb.at(i, kd) = k.at(b, i, head * d + kd);
            vb.at(i, kd) = v.at(b, i, head * d + kd);
          }
        }
        Tensor scores;
        Tensor ob = scaled_dot_attention(qb, kb, vb, want_scores ? &scores : nullptr);
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t kd = 0; kd < d; ++kd) {
            attended.at(b, i, head * d + kd) = ob.at(i, kd);
          }
        }
        if (want_scores) {
          const double weight = 1.0 / static_cast<double>(heads);
          for (std::size_t i = 0; i < n * n; ++i) {
            mean_scores[b * n * n + i] += static_cast<real>(weight * scores[i]);
          }
        }
      }
    }
    if (want_scores) hooks->on_attention_scores(site, layer, mean_scores);

    // Project back to channel space and add the residual.
    Tensor y({batch, n, c});
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t cc = 0; cc < c; ++cc) {
          double acc = 0.0;
          for (std::size_t kdim = 0; kdim < hd; ++kdim) {
            acc += static_cast<double>(attended.at(b, i, kdim)) * p.wo.at(kdim, cc);
          }
          y.at(b, i, cc) = static_cast<real>(acc);
        }
      }
    }
    Tensor y_video = site == AttentionSite::spatial ? spatial_untokens(y, h, w)
                                                    : temporal_untokens(y, h, w);
    return lin_combine(1.0, x, 1.0, y_video);
  }

  VideoLatent run(const VideoLatent& z, const ConditioningBundle& cond, int t,
                  FeatureHooks* hooks) const {
    if (z.rank() != 4) {
      throw ConditioningError("latent must be [F,C,H,W], got " + z.shape_string());
    }
    const std::size_t f = z.dim(0), c = z.dim(1), h = z.dim(2), w = z.dim(3);
    if (f < 2) throw ConditioningError("need at least 2 frames, got " + std::to_string(f));
    if (c != static_cast<std::size_t>(config.in_channels)) {
      throw ConditioningError("latent has " + std::to_string(c) + " channels, model expects " +
                              std::to_string(config.in_channels));
    }
    const Tensor& ff = cond.first_frame_latent;
    if (ff.rank() != 3 || ff.dim(0) != c || ff.dim(1) != h || ff.dim(2) != w) {
      throw ConditioningError("first-frame latent " + ff.shape_string() +
                              " does not match video latent " + z.shape_string());
    }
    const std::size_t div = std::size_t(1) << (config.depth - 1);
    if (h % div != 0 || w % div != 0) {
      throw ConditioningError("spatial extents must be divisible by " + std::to_string(div) +
                              " for depth " + std::to_string(config.depth));
    }
    if (cond.text_embed.size() != static_cast<std::size_t>(config.text_embed_dim)) {
      throw ConditioningError("text embedding length " + std::to_string(cond.text_embed.size()) +
                              " does not match configured " +
                              std::to_string(config.text_embed_dim));
    }
    if (!z.all_finite() || !ff.all_finite()) {
      throw KernelError("forward: non-finite conditioning or latent");
    }

    // Timestep embedding with the text embedding folded in.
    std::vector<double> e = timestep_embedding(t);
    e = lin_apply(temb_lin1, e);
    e = silu_vec(e);
    e = lin_apply(temb_lin2, e);
    for (std::size_t i = 0; i < temb_dim; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < cond.text_embed.size(); ++j) {
        acc += static_cast<double>(text_proj.at(i, j)) * cond.text_embed[j];
      }
      e[i] += acc;
    }
    const std::vector<double> temb = silu_vec(e);

    // First-frame conditioning: channel-concat, broadcast over frames.
    Tensor ff_video({f, c, h, w});
    for (std::size_t fi = 0; fi < f; ++fi) frame_assign(ff_video, fi, ff);
    Tensor hcur = conv_video(concat_channels(z, ff_video), input_conv, 1);

    std::vector<Tensor> skips;
    const std::size_t depth = static_cast<std::size_t>(config.depth);
    for (std::size_t lv = 0; lv < depth; ++lv) {
      hcur = res_apply(enc_res[lv], hcur, temb, nullptr, -1);
      skips.push_back(hcur);
      if (lv + 1 < depth) hcur = conv_video(hcur, down[lv], 2);
    }

    hcur = res_apply(mid_res, hcur, temb, nullptr, -1);
    hcur = attn_apply(mid_sattn, hcur, AttentionSite::spatial, nullptr, -1);
    hcur = attn_apply(mid_tattn, hcur, AttentionSite::temporal, nullptr, -1);

    int layer = 0;
    for (std::size_t lv = depth; lv-- > 0;) {
      for (int j = 0; j < decoder_counts[lv]; ++j) {
        const DecoderLayerParam& dl = dec_layers[static_cast<std::size_t>(layer)];
        Tensor input = j == 0 ? concat_channels(hcur, skips[lv]) : std::move(hcur);
        hcur = res_apply(dl.res, input, temb, hooks, layer);
        hcur = attn_apply(dl.sattn, hcur, AttentionSite::spatial, hooks, layer);
        hcur = attn_apply(dl.tattn, hcur, AttentionSite::temporal, hooks, layer);
        ++layer;
      }
      if (lv > 0) hcur = conv_video(upsample_nearest2(hcur), up[lv], 1);
    }

    hcur = gn_video(hcur, out_gn);
    hcur = silu_all(hcur);
    return conv_video(hcur, out_conv, 1);
  }

  // Stable parameter enumeration in initialization order.
  void visit_params(const std::function<void(const std::string&, const Tensor&)>& fn) const {
    auto conv = [&](const std::string& name, const ConvParam& p) {
      fn(name + ".w", p.w);
      fn(name + ".b", p.b);
    };
    auto lin = [&](const std::string& name, const LinParam& p) {
      fn(name + ".w", p.w);
      fn(name + ".b", p.b);
    };
    auto gn = [&](const std::string& name, const GnParam& p) {
      fn(name + ".gain", p.gain);
      fn(name + ".bias", p.bias);
    };
    auto res = [&](const std::string& name, const ResBlockParam& p) {
      gn(name + ".gn1", p.gn1);
      conv(name + ".conv1", p.conv1);
      lin(name + ".temb", p.temb);
      gn(name + ".gn2", p.gn2);
      conv(name + ".conv2", p.conv2);
      if (!p.shortcut.empty()) fn(name + ".shortcut", p.shortcut);
    };
    auto attn = [&](const std::string& name, const AttnParam& p) {
      gn(name + ".gn", p.gn);
      fn(name + ".wq", p.wq);
      fn(name + ".wk", p.wk);
      fn(name + ".wv", p.wv);
      fn(name + ".wo", p.wo);
    };

    conv("input_conv", input_conv);
    lin("temb_lin1", temb_lin1);
    lin("temb_lin2", temb_lin2);
    fn("text_proj", text_proj);
    for (std::size_t lv = 0; lv < enc_res.size(); ++lv) {
      res("enc" + std::to_string(lv) + ".res", enc_res[lv]);
      if (lv < down.size()) conv("down" + std::to_string(lv), down[lv]);
    }
    res("mid.res", mid_res);
    attn("mid.sattn", mid_sattn);
    attn("mid.tattn", mid_tattn);
    for (std::size_t i = 0; i < dec_layers.size(); ++i) {
      const std::string base = "dec" + std::to_string(i);
      res(base + ".res", dec_layers[i].res);
      attn(base + ".sattn", dec_layers[i].sattn);
      attn(base + ".tattn", dec_layers[i].tattn);
    }
    for (std::size_t lv = 1; lv < up.size(); ++lv) conv("up" + std::to_string(lv), up[lv]);
    gn("out_gn", out_gn);
    conv("out_conv", out_conv);
  }

  void visit_params_mut(const std::function<void(const std::string&, Tensor&)>& fn) {
    // Mirror of visit_params with mutable access; used by load_weights.
    const_cast<const Impl*>(this)->visit_params([&](const std::string& name, const Tensor& t) {
      fn(name, const_cast<Tensor&>(t));
    });
  }
};

UNet::UNet(const UNetConfig& config) : impl_(std::make_unique<Impl>(config)) {}
UNet::~UNet() = default;
UNet::UNet(UNet&&) noexcept = default;
UNet& UNet::operator=(UNet&&) noexcept = default;

const UNetConfig& UNet::config() const { return impl_->config; }

int UNet::decoder_layer_level(int layer) const {
  if (layer < 0 || layer >= impl_->config.decoder_layer_count) {
    throw ConfigError("decoder layer " + std::to_string(layer) + " outside [0, " +
                      std::to_string(impl_->config.decoder_layer_count) + ")");
  }
  int remaining = layer;
  for (std::size_t lv = impl_->decoder_counts.size(); lv-- > 0;) {
    if (remaining < impl_->decoder_counts[lv]) return static_cast<int>(lv);
    remaining -= impl_->decoder_counts[lv];
  }
  return 0;
}

VideoLatent UNet::forward(const VideoLatent& z, const ConditioningBundle& cond, int t,
                          FeatureHooks* hooks) const {
  return impl_->run(z, cond, t, hooks);
}

std::vector<std::pair<std::string, const Tensor*>> UNet::parameters() const {
  std::vector<std::pair<std::string, const Tensor*>> out;
  impl_->visit_params([&](const std::string& name, const Tensor& t) {
    out.emplace_back(name, &t);
  });
  return out;
}

void UNet::save_weights(const std::string& dir) const {
  fs::create_directories(dir);
  impl_->visit_params([&](const std::string& name, const Tensor& t) {
    write_tensor((fs::path(dir) / (name + ".tensor")).string(), t);
  });
}

void UNet::load_weights(const std::string& dir) {
  impl_->visit_params_mut([&](const std::string& name, Tensor& t) {
    const std::string path = (fs::path(dir) / (name + ".tensor")).string();
    Tensor loaded = read_tensor(path);
    if (loaded.dims() != t.dims()) {
      throw FormatError(path + ": stored shape " + loaded.shape_string() +
                        " does not match model shape " + t.shape_string());
    }
    t = std::move(loaded);
  });
}

}  // namespace av2v
