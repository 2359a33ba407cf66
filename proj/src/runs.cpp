// Copyright (c) 2026 av2v contributors
// SPDX-License-Identifier: Apache-2.0

#include "av2v/runs.hpp"

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>

#include "av2v/metrics.hpp"

namespace fs = std::filesystem;

namespace av2v {

namespace {

std::string step_file_name(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "z_step_%03d", index);
  return buf;
}

Tensor first_frame_slice(const VideoLatent& video) {
  const std::size_t per = video.dim(1) * video.dim(2) * video.dim(3);
  Tensor out({video.dim(1), video.dim(2), video.dim(3)});
  std::memcpy(out.data(), video.data(), per * sizeof(real));
  return out;
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << text;
  if (!out) throw IoError("short write: " + path);
}

// Channel mean of a [F,C,H,W] feature block -> [F,H,W].
Tensor channel_mean(const Tensor& value) {
  const std::size_t f = value.dim(0), c = value.dim(1), h = value.dim(2), w = value.dim(3);
  const std::size_t plane = h * w;
  Tensor out({f, h, w});
  for (std::size_t fi = 0; fi < f; ++fi) {
    for (std::size_t p = 0; p < plane; ++p) {
      double acc = 0.0;
      for (std::size_t ci = 0; ci < c; ++ci) acc += value[(fi * c + ci) * plane + p];
      out[fi * plane + p] = static_cast<real>(acc / static_cast<double>(c));
    }
  }
  return out;
}

// Tile the frames of a [F,H,W] tensor side by side into one [H, F*W] image.
Tensor tile_frames(const Tensor& t) {
  const std::size_t f = t.dim(0), h = t.dim(1), w = t.dim(2);
  Tensor out({h, f * w});
  for (std::size_t fi = 0; fi < f; ++fi) {
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        out.at(y, fi * w + x) = t.at(fi, y, x);
      }
    }
  }
  return out;
}

// Writes visualization tensors while the reconstruction branch denoises.
class VizHooks : public FeatureHooks {
 public:
  VizHooks(const InjectionPlan& plan, const UNet& model, std::size_t latent_h,
           std::size_t latent_w, std::string dir, bool with_pgm)
      : plan_(plan),
        model_(model),
        latent_h_(latent_h),
        latent_w_(latent_w),
        dir_(std::move(dir)),
        with_pgm_(with_pgm) {}

  void set_step(int step) { step_ = step; }
  std::size_t files_written() const { return files_written_; }

  void on_feature(FeatureKind kind, int layer, Tensor& value) override {
    if (kind != FeatureKind::conv_f || plan_.conv_layers.count(layer) == 0) return;
    emit(layer, "conv", channel_mean(value));
  }

  bool wants_attention_scores() const override { return true; }

  void on_attention_scores(AttentionSite site, int layer, const Tensor& scores) override {
    const int level = model_.decoder_layer_level(layer);
    const std::size_t h = latent_h_ >> level, w = latent_w_ >> level;
    if (site == AttentionSite::spatial) {
      if (plan_.spatial_layers.count(layer) == 0) return;
      // scores: [F, n, n]; mean attention received by each token.
      const std::size_t f = scores.dim(0), n = scores.dim(1);
      if (n != h * w) {
        throw PipelineError("attention token count does not match layer resolution");
      }
      Tensor viz({f, h, w});
      for (std::size_t fi = 0; fi < f; ++fi) {
        for (std::size_t j = 0; j < n; ++j) {
          double acc = 0.0;
          for (std::size_t i = 0; i < n; ++i) acc += scores.at(fi, i, j);
          viz[fi * n + j] = static_cast<real>(acc / static_cast<double>(n));
        }
      }
      emit(layer, "sa", viz);
    } else {
      if (plan_.temporal_layers.count(layer) == 0) return;
      // scores: [n, F, F]; mean attention received by each frame-token.
      const std::size_t n = scores.dim(0), f = scores.dim(1);
      if (n != h * w) {
        throw PipelineError("attention position count does not match layer resolution");
      }
      Tensor viz({f, h, w});
      for (std::size_t p = 0; p < n; ++p) {
        for (std::size_t ft = 0; ft < f; ++ft) {
          double acc = 0.0;
          for (std::size_t ff = 0; ff < f; ++ff) acc += scores.at(p, ff, ft);
          viz[ft * n + p] = static_cast<real>(acc / static_cast<double>(f));
        }
      }
      emit(layer, "ta", viz);
    }
  }

 private:
  void emit(int layer, const char* tag, const Tensor& viz) {
    char name[64];
    std::snprintf(name, sizeof(name), "viz_step%03d_layer%02d_%s", step_, layer, tag);
    const std::string base = (fs::path(dir_) / name).string();
    write_tensor(base, viz);
    ++files_written_;
    if (with_pgm_) write_pgm(base + ".pgm", tile_frames(viz));
  }

  const InjectionPlan& plan_;
  const UNet& model_;
  std::size_t latent_h_, latent_w_;
  std::string dir_;
  bool with_pgm_;
  int step_ = 0;
  std::size_t files_written_ = 0;
};

}  // namespace

InversionResult read_ladder(const std::string& dir) {
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir);
  std::map<int, std::string> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    int index = -1;
    if (std::sscanf(name.c_str(), "z_step_%d", &index) == 1 &&
        name == step_file_name(index)) {
      files[index] = entry.path().string();
    }
  }
  if (files.empty()) throw FormatError("no z_step_* ladder files in " + dir);
  InversionResult inv;
  int expected = 0;
  for (const auto& [index, path] : files) {
    if (index != expected) {
      throw FormatError("ladder is missing " + step_file_name(expected) + " in " + dir);
    }
    Tensor rung = read_tensor(path);
    if (rung.rank() != 4) {
      throw FormatError(path + ": ladder rung must be rank 4, got " + rung.shape_string());
    }
    if (!inv.ladder.empty() && !rung.same_shape(inv.ladder.front())) {
      throw FormatError(path + ": rung shape " + rung.shape_string() +
                        " differs from earlier rungs");
    }
    inv.ladder.push_back(std::move(rung));
    ++expected;
  }
  if (inv.ladder.size() < 2) throw FormatError("ladder in " + dir + " holds no steps");
  return inv;
}

Runner::Runner(RunConfig cfg)
    : cfg_(std::move(cfg)),
      codec_((cfg_.validate(), cfg_.codec())),
      sched_(cfg_.schedule()),
      model_(cfg_.unet_config()),
      plan_(cfg_.plan()) {}

void Runner::write_resolved(const std::string& out_dir, const std::string& frames_dir,
                            const std::string& out_arg, const std::string& ladder_dir,
                            const std::string& edited_first_frame,
                            const std::string& prompt) const {
  RunConfig effective = cfg_;
  effective.frames = frames_dir;
  effective.out = out_arg;
  effective.ladder = ladder_dir;
  effective.edited_first_frame = edited_first_frame;
  effective.prompt = prompt;
  write_text_file((fs::path(out_dir) / "resolved.cfg").string(), effective.serialize());
}

void Runner::invert(const std::string& frames_dir, const std::string& out_dir) const {
  const FrameSequence fseq = read_frames(frames_dir);
  const VideoLatent source = codec_.encode_video(fseq);
  const InversionResult inv =
      invert_video(source, first_frame_slice(source), sched_, model_, progress_);

  fs::create_directories(out_dir);
  write_resolved(out_dir, frames_dir, out_dir, "", "", "");
  for (std::size_t i = 0; i < inv.ladder.size(); ++i) {
    write_tensor((fs::path(out_dir) / step_file_name(static_cast<int>(i))).string(),
                 inv.ladder[i]);
  }
}

void Runner::reconstruct(const std::string& ladder_dir, const std::string& out_dir,
                         bool dump_features) const {
  const InversionResult inv = read_ladder(ladder_dir);
  if (inv.steps() != cfg_.steps) {
    throw ConfigError("key 'steps': config expects " + std::to_string(cfg_.steps) +
                      " steps but the ladder holds " + std::to_string(inv.steps()));
  }
  FeatureCache cache;
  const VideoLatent recon = av2v::reconstruct(inv, sched_, model_, plan_,
                                              dump_features ? &cache : nullptr, nullptr,
                                              progress_);
  fs::create_directories(out_dir);
  write_resolved(out_dir, "", out_dir, ladder_dir, "", "");
  write_frames(out_dir, codec_.decode_video(recon));
  if (dump_features) cache.dump((fs::path(out_dir) / "features").string());
}

void Runner::edit(const std::string& frames_dir, const std::string& edited_first_frame_path,
                  const std::string& target_prompt, const std::string& out_dir) const {
  std::vector<std::string> log_lines;
  ProgressFn progress = [this, &log_lines](const std::string& line) {
    log_lines.push_back(line);
    if (progress_) progress_(line);
  };

  const FrameSequence fseq = read_frames(frames_dir);
  const VideoLatent source = codec_.encode_video(fseq);
  const Tensor edited_frame = codec_.encode_frame(read_ppm(edited_first_frame_path));

  const InversionResult inv =
      invert_video(source, first_frame_slice(source), sched_, model_, progress);

  FeatureCache cache;
  av2v::reconstruct(inv, sched_, model_, plan_, &cache, nullptr, progress);

  EditRequest req;
  req.source_latents = source;
  req.edited_first_frame = edited_frame;
  req.target_prompt = target_prompt;
  req.negative_prompt = cfg_.negative_prompt;
  req.guidance_scale = cfg_.guidance_scale;
  req.t_prime_fraction = cfg_.t_prime_fraction;
  req.plan = plan_;
  const VideoLatent result =
      av2v::edit(req, inv, cache, sched_, model_, nullptr, nullptr, nullptr, progress);

  fs::create_directories(out_dir);
  write_resolved(out_dir, frames_dir, out_dir, "", edited_first_frame_path, target_prompt);
  write_frames(out_dir, codec_.decode_video(result));
  std::string log_text;
  for (const std::string& line : log_lines) {
    log_text += line;
    log_text += '\n';
  }
  write_text_file((fs::path(out_dir) / "progress.log").string(), log_text);
}

void Runner::features(const std::string& ladder_dir, const std::string& out_dir,
                      bool with_pgm) const {
  const InversionResult inv = read_ladder(ladder_dir);
  if (inv.steps() != cfg_.steps) {
    throw ConfigError("key 'steps': config expects " + std::to_string(cfg_.steps) +
                      " steps but the ladder holds " + std::to_string(inv.steps()));
  }
  fs::create_directories(out_dir);
  write_resolved(out_dir, "", out_dir, ladder_dir, "", "");

  const VideoLatent& top = inv.ladder.back();
  VizHooks viz(plan_, model_, top.dim(2), top.dim(3), out_dir, with_pgm);
  const ConditioningBundle cond = make_conditioning(first_frame_slice(inv.ladder.front()), "",
                                                    model_.config().text_embed_dim);
  VideoLatent z = top;
  const int total = sched_.steps();
  for (int k = 0; k < total; ++k) {
    const int j = total - 1 - k;
    const int t = sched_.sample_steps[static_cast<std::size_t>(j)];
    const int t_prev = j > 0 ? sched_.sample_steps[static_cast<std::size_t>(j - 1)] : -1;
    viz.set_step(k);
    const VideoLatent eps = model_.forward(z, cond, t, &viz);
    z = ddim_denoise_step(z, eps, t, t_prev, sched_);
    if (!z.all_finite()) {
      throw DivergenceError("feature pass produced a non-finite latent at step " +
                            std::to_string(k));
    }
    if (progress_) {
      progress_("features step=" + std::to_string(k + 1) + "/" + std::to_string(total) +
                " t=" + std::to_string(t));
    }
  }
}

double Runner::metrics(const std::string& frames_dir, const std::string& csv_path) const {
  const FrameSequence fseq = read_frames(frames_dir);
  std::vector<double> per_pair;
  const double score = frame_consistency(fseq, make_codec_embedder(codec_), &per_pair);
  if (!csv_path.empty()) {
    std::string csv = "pair,cosine\n";
    char buf[64];
    for (std::size_t i = 0; i < per_pair.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%zu,%.17g\n", i, per_pair[i]);
      csv += buf;
    }
    write_text_file(csv_path, csv);
  }
  return score;
}

}  // namespace av2v
