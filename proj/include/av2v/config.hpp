// Copyright (c) 2026 av2v contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "av2v/injection.hpp"
#include "av2v/media_io.hpp"
#include "av2v/pipeline.hpp"
#include "av2v/schedule.hpp"
#include "av2v/unet.hpp"

namespace av2v {

// Flat `key = value` run configuration. Every key has a default; unknown
// keys are rejected; the resolved form is echoed into each run directory as
// resolved.cfg so a run is reproducible from that file alone.
struct RunConfig {
  // model
  std::uint64_t seed = 0;
  int base_channels = 16;
  int depth = 2;
  int decoder_layers = 12;
  int head_dim = 32;
  int num_heads = 1;
  int text_embed_dim = 32;
  int frames_nominal = 16;

  // pixel <-> latent codec
  int patch = 8;

  // schedule
  int t_train = 1000;
  double beta_start = 0.00085;
  double beta_end = 0.012;
  int steps = 50;

  // injection plan
  std::vector<int> l1{4};
  std::vector<int> l2{4, 5, 6, 7, 8, 9, 10, 11};
  std::vector<int> l3{4, 5, 6, 7, 8, 9, 10, 11};
  double tau_conv = 0.2;
  double tau_sa = 0.2;
  double tau_ta = 0.5;

  // sampling
  double guidance_scale = 7.5;
  double t_prime_fraction = 1.0;
  std::string negative_prompt = kDefaultNegativePrompt;

  // optional default paths; command-line flags take precedence
  std::string frames;
  std::string out;
  std::string ladder;
  std::string edited_first_frame;
  std::string prompt;

  static RunConfig parse_text(const std::string& text);
  static RunConfig parse_file(const std::string& path);

  // Canonical `key = value` form covering every key.
  std::string serialize() const;

  void validate() const;

  // Derived pieces. The latent channel count is fixed by the codec.
  int latent_channels() const { return 3 * patch * patch; }
  PatchCodec codec() const { return PatchCodec(patch, seed); }
  UNetConfig unet_config() const;
  NoiseSchedule schedule() const { return build_schedule(t_train, beta_start, beta_end, steps); }
  InjectionPlan plan() const;
};

}  // namespace av2v
