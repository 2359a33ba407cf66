// Copyright (c) 2026 av2v contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <string>
#include <vector>

#include "av2v/injection.hpp"
#include "av2v/schedule.hpp"
#include "av2v/tensor.hpp"
#include "av2v/unet.hpp"

namespace av2v {

// Line-oriented progress events (one call per sampling step).
using ProgressFn = std::function<void(const std::string&)>;

inline constexpr const char* kDefaultNegativePrompt =
    "Distorted, discontinuous, Ugly, blurry, low resolution, motionless, static, disfigured, "
    "disconnected limbs, Ugly faces, incomplete arms";

// The stored inversion trajectory: ladder[0] is the clean source latent and
// ladder[i] sits at timestep sample_steps[i-1], so the length is T + 1 and
// ladder.back() is the noisiest rung.
struct InversionResult {
  std::vector<VideoLatent> ladder;

  int steps() const { return static_cast<int>(ladder.size()) - 1; }
};

struct EditRequest {
  VideoLatent source_latents;  // [F,C,H,W], F >= 2 and unrestricted above that
  Tensor edited_first_frame;   // [C,H,W]
  std::string target_prompt;
  std::string negative_prompt = kDefaultNegativePrompt;
  double guidance_scale = 7.5;
  double t_prime_fraction = 1.0;  // in (0,1]; sampling starts at floor((1-f)*T)
  InjectionPlan plan;
};

// Walks the source video up the noise ladder, conditioning every model call
// on the (unedited) first frame and the null prompt, and stores every rung.
InversionResult invert_video(const VideoLatent& source_latents, const Tensor& first_frame,
                             const NoiseSchedule& sched, const UNet& model,
                             const ProgressFn& progress = {});

// Denoises from the top of the ladder with the same conditioning the
// inversion used. When record_into is non-null, every planned (step, layer,
// kind) site of the plan is recorded into it along the way; recording has no
// effect on the returned latent. The per-step outputs land in *trajectory
// when provided (noisiest first).
VideoLatent reconstruct(const InversionResult& inv, const NoiseSchedule& sched, const UNet& model,
                        const InjectionPlan& plan, FeatureCache* record_into = nullptr,
                        std::vector<VideoLatent>* trajectory = nullptr,
                        const ProgressFn& progress = {});

// Classifier-free guidance: eps_neg + w * (eps_cond - eps_neg). w == 1
// returns eps_cond exactly.
VideoLatent cfg_combine(const VideoLatent& eps_cond, const VideoLatent& eps_neg, double w);

// Denoises the edit branch from the ladder rung selected by
// t_prime_fraction, conditioning on the edited first frame and the target
// prompt, with cached source features injected into both CFG branches.
VideoLatent edit(const EditRequest& req, const InversionResult& inv, const FeatureCache& cache,
                 const NoiseSchedule& sched, const UNet& model,
                 std::vector<VideoLatent>* trajectory = nullptr,
                 InjectionAudit* audit_cond = nullptr, InjectionAudit* audit_neg = nullptr,
                 const ProgressFn& progress = {});

}  // namespace av2v
