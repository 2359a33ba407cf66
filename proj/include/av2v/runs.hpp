// Copyright (c) 2026 av2v contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include "av2v/config.hpp"
#include "av2v/media_io.hpp"
#include "av2v/pipeline.hpp"

namespace av2v {

// Reads z_step_%03d tensor files (0 = clean latent) back into a ladder.
InversionResult read_ladder(const std::string& dir);

// Binds a configuration to a codec, schedule and model, and runs the
// file-level commands. Each run directory gets a resolved.cfg echoing the
// effective configuration; inputs are never modified.
class Runner {
 public:
  explicit Runner(RunConfig cfg);

  const RunConfig& config() const { return cfg_; }
  std::string resolved_config() const { return cfg_.serialize(); }
  void set_progress(ProgressFn fn) { progress_ = std::move(fn); }

  // frames -> noise ladder (z_step_%03d files).
  void invert(const std::string& frames_dir, const std::string& out_dir) const;

  // ladder -> reconstructed frames; optionally dumps the feature cache
  // recorded along the way under <out>/features.
  void reconstruct(const std::string& ladder_dir, const std::string& out_dir,
                   bool dump_features) const;

  // frames + edited first frame + prompt -> edited frames. Runs the whole
  // second stage: inversion, source recording pass, guided edit pass.
  void edit(const std::string& frames_dir, const std::string& edited_first_frame_path,
            const std::string& target_prompt, const std::string& out_dir) const;

  // ladder -> per-step per-layer visualization tensors: channel-mean conv
  // activations and token-mean attention scores for the planned layers.
  void features(const std::string& ladder_dir, const std::string& out_dir, bool with_pgm) const;

  // frames -> consistency score; optional per-pair CSV.
  double metrics(const std::string& frames_dir, const std::string& csv_path) const;

 private:
  void write_resolved(const std::string& out_dir, const std::string& frames_dir,
                      const std::string& out_arg, const std::string& ladder_dir,
                      const std::string& edited_first_frame, const std::string& prompt) const;

  RunConfig cfg_;
  PatchCodec codec_;
  NoiseSchedule sched_;
  UNet model_;
  InjectionPlan plan_;
  ProgressFn progress_;
};

}  // namespace av2v
