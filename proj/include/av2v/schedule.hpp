// Copyright (c) 2026 av2v contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "av2v/tensor.hpp"

namespace av2v {

// Diffusion noise schedule: per-step variances over the training horizon,
// their cumulative products, and the sampled timestep ladder actually
// visited during inversion/denoising.
struct NoiseSchedule {
  int t_train = 0;
  std::vector<double> beta;       // length t_train
  std::vector<double> alpha_bar;  // length t_train, strictly decreasing
  std::vector<int> sample_steps;  // strictly increasing, length T

  int steps() const { return static_cast<int>(sample_steps.size()); }

  // Cumulative alpha at timestep t; t == -1 denotes the clean endpoint
  // (alpha_bar == 1).
  double alpha_bar_at(int t) const;
};

// Linear beta ramp from beta_start to beta_end over t_train steps plus a
// floor-stride timestep ladder of length sampling_steps.
NoiseSchedule build_schedule(int t_train, double beta_start, double beta_end, int sampling_steps);

// Deterministic DDIM update (eta = 0) from timestep t down to t_prev, where
// t_prev == -1 targets the clean endpoint. eps is the model's noise
// prediction at (z_t, t).
Tensor ddim_denoise_step(const Tensor& z_t, const Tensor& eps, int t, int t_prev,
                         const NoiseSchedule& sched);

// The reverse update from timestep t (or -1 for the clean endpoint) up to
// t_next. Algebraic inverse of ddim_denoise_step when the same eps is used.
Tensor ddim_invert_step(const Tensor& z_t, const Tensor& eps, int t, int t_next,
                        const NoiseSchedule& sched);

}  // namespace av2v
