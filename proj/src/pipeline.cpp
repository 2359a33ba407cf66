// Copyright (c) 2026 av2v contributors
// SPDX-License-Identifier: Apache-2.0

#include "av2v/pipeline.hpp"

#include <cmath>
#include <cstring>

namespace av2v {

namespace {

Tensor first_frame_of(const VideoLatent& video) {
  const std::size_t per = video.dim(1) * video.dim(2) * video.dim(3);
  Tensor out({video.dim(1), video.dim(2), video.dim(3)});
  std::memcpy(out.data(), video.data(), per * sizeof(real));
  return out;
}

void require_finite_latent(const VideoLatent& z, const char* phase, int step) {
  if (!z.all_finite()) {
    throw DivergenceError(std::string(phase) + " produced a non-finite latent at step " +
                          std::to_string(step));
  }
}

void emit(const ProgressFn& progress, const std::string& line) {
  if (progress) progress(line);
}

// Timestep of the rung processed at sampling step k (k == 0 is the noisiest
// step) and of the rung it denoises to.
int step_timestep(const NoiseSchedule& sched, int k) {
  return sched.sample_steps[static_cast<std::size_t>(sched.steps() - 1 - k)];
}

int step_timestep_prev(const NoiseSchedule& sched, int k) {
  const int j = sched.steps() - 1 - k;
  return j > 0 ? sched.sample_steps[static_cast<std::size_t>(j - 1)] : -1;
}

}  // namespace

InversionResult invert_video(const VideoLatent& source_latents, const Tensor& first_frame,
                             const NoiseSchedule& sched, const UNet& model,
                             const ProgressFn& progress) {
  if (source_latents.rank() != 4) {
    throw PipelineError("source latents must be [F,C,H,W], got " + source_latents.shape_string());
  }
  const int total = sched.steps();
  const ConditioningBundle cond =
      make_conditioning(first_frame, "", model.config().text_embed_dim);

  InversionResult inv;
  inv.ladder.reserve(static_cast<std::size_t>(total) + 1);
  inv.ladder.push_back(source_latents);

  int t_from = -1;
  for (int i = 0; i < total; ++i) {
    const int t_to = sched.sample_steps[static_cast<std::size_t>(i)];
    // The model is evaluated at the rung being created; the clean endpoint
    // has no valid timestep of its own.
    const VideoLatent eps = model.forward(inv.ladder.back(), cond, t_to);
    VideoLatent next = ddim_invert_step(inv.ladder.back(), eps, t_from, t_to, sched);
    require_finite_latent(next, "inversion", i);
    inv.ladder.push_back(std::move(next));
    emit(progress, "invert step=" + std::to_string(i + 1) + "/" + std::to_string(total) +
                       " t=" + std::to_string(t_to));
    t_from = t_to;
  }
  return inv;
}

VideoLatent reconstruct(const InversionResult& inv, const NoiseSchedule& sched, const UNet& model,
                        const InjectionPlan& plan, FeatureCache* record_into,
                        std::vector<VideoLatent>* trajectory, const ProgressFn& progress) {
  const int total = sched.steps();
  if (inv.steps() != total) {
    throw PipelineError("ladder holds " + std::to_string(inv.steps()) +
                        " steps but the schedule expects " + std::to_string(total));
  }
  if (record_into != nullptr && !record_into->empty()) {
    throw CacheError("recording target cache is already populated");
  }
  const ConditioningBundle cond =
      make_conditioning(first_frame_of(inv.ladder.front()), "", model.config().text_embed_dim);

  FeatureCache unused;
  RecordingHooks recorder(plan, record_into != nullptr ? *record_into : unused);
  RecordingHooks* hooks = record_into != nullptr ? &recorder : nullptr;

  VideoLatent z = inv.ladder.back();
  for (int k = 0; k < total; ++k) {
    const int t = step_timestep(sched, k);
    const int t_prev = step_timestep_prev(sched, k);
    if (hooks != nullptr) hooks->set_step(k);
    const VideoLatent eps = model.forward(z, cond, t, hooks);
    z = ddim_denoise_step(z, eps, t, t_prev, sched);
    require_finite_latent(z, "reconstruction", k);
    if (trajectory != nullptr) trajectory->push_back(z);
    emit(progress, "reconstruct step=" + std::to_string(k + 1) + "/" + std::to_string(total) +
                       " t=" + std::to_string(t));
  }
  return z;
}

VideoLatent cfg_combine(const VideoLatent& eps_cond, const VideoLatent& eps_neg, double w) {
  if (!eps_cond.same_shape(eps_neg)) {
    throw PipelineError("guidance branches disagree on shape: " + eps_cond.shape_string() +
                        " vs " + eps_neg.shape_string());
  }
  if (w == 1.0) return eps_cond;
  VideoLatent out(eps_cond.dims());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double c = eps_cond[i], n = eps_neg[i];
    out[i] = static_cast<real>(n + w * (c - n));
  }
  return out;
}

VideoLatent edit(const EditRequest& req, const InversionResult& inv, const FeatureCache& cache,
                 const NoiseSchedule& sched, const UNet& model,
                 std::vector<VideoLatent>* trajectory, InjectionAudit* audit_cond,
                 InjectionAudit* audit_neg, const ProgressFn& progress) {
  const int total = sched.steps();
  if (inv.steps() != total) {
    throw PipelineError("ladder holds " + std::to_string(inv.steps()) +
                        " steps but the schedule expects " + std::to_string(total));
  }
  if (req.plan.total_steps != total) {
    throw PipelineError("plan covers " + std::to_string(req.plan.total_steps) +
                        " steps but the schedule runs " + std::to_string(total));
  }
  if (!(req.guidance_scale >= 1.0)) {
    throw PipelineError("guidance scale must be >= 1");
  }
  if (!(req.t_prime_fraction > 0.0 && req.t_prime_fraction <= 1.0)) {
    throw PipelineError("t_prime_fraction must lie in (0, 1]");
  }
  const VideoLatent& src = req.source_latents;
  const Tensor& edited = req.edited_first_frame;
  if (src.rank() != 4 || edited.rank() != 3 || edited.dim(0) != src.dim(1) ||
      edited.dim(1) != src.dim(2) || edited.dim(2) != src.dim(3)) {
    throw ConditioningError("edited first frame " + edited.shape_string() +
                            " does not match source latent " + src.shape_string());
  }

  const int dim = model.config().text_embed_dim;
  const ConditioningBundle cond = make_conditioning(edited, req.target_prompt, dim);
  const ConditioningBundle neg = make_conditioning(edited, req.negative_prompt, dim);

  InjectingHooks inject_cond(req.plan, cache, audit_cond);
  InjectingHooks inject_neg(req.plan, cache, audit_neg);

  const int k_start = static_cast<int>(std::floor((1.0 - req.t_prime_fraction) * total));
  VideoLatent z = inv.ladder[static_cast<std::size_t>(total - k_start)];
  for (int k = k_start; k < total; ++k) {
    const int t = step_timestep(sched, k);
    const int t_prev = step_timestep_prev(sched, k);
    inject_cond.set_step(k);
    inject_neg.set_step(k);
    const VideoLatent eps_cond = model.forward(z, cond, t, &inject_cond);
    const VideoLatent eps_neg = model.forward(z, neg, t, &inject_neg);
    const VideoLatent eps = cfg_combine(eps_cond, eps_neg, req.guidance_scale);
    z = ddim_denoise_step(z, eps, t, t_prev, sched);
    require_finite_latent(z, "edit", k);
    if (trajectory != nullptr) trajectory->push_back(z);
    emit(progress, "edit step=" + std::to_string(k + 1) + "/" + std::to_string(total) +
                       " t=" + std::to_string(t));
  }
  return z;
}

}  // namespace av2v
