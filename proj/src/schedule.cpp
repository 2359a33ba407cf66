// Copyright (c) 2026 av2v contributors
// SPDX-License-Identifier: Apache-2.0

#include "av2v/schedule.hpp"

#include <cmath>
#include <string>

namespace av2v {

double NoiseSchedule::alpha_bar_at(int t) const {
  if (t == -1) return 1.0;
  if (t < 0 || t >= t_train) {
    throw StepOrderError("timestep " + std::to_string(t) + " outside training horizon [0, " +
                         std::to_string(t_train) + ")");
  }
  return alpha_bar[static_cast<std::size_t>(t)];
}

NoiseSchedule build_schedule(int t_train, double beta_start, double beta_end, int sampling_steps) {
  if (sampling_steps < 1 || t_train < sampling_steps) {
    throw ConfigError("schedule requires t_train >= steps >= 1 (got t_train=" +
                      std::to_string(t_train) + ", steps=" + std::to_string(sampling_steps) + ")");
  }
  if (!(beta_start > 0.0) || !(beta_start <= beta_end) || !(beta_end < 1.0)) {
    throw ConfigError("schedule requires 0 < beta_start <= beta_end < 1");
  }

  NoiseSchedule s;
  s.t_train = t_train;
  s.beta.resize(static_cast<std::size_t>(t_train));
  s.alpha_bar.resize(static_cast<std::size_t>(t_train));
  double cumulative = 1.0;
  for (int i = 0; i < t_train; ++i) {
    const double frac = t_train > 1 ? static_cast<double>(i) / (t_train - 1) : 0.0;
    const double b = beta_start + (beta_end - beta_start) * frac;
    s.beta[static_cast<std::size_t>(i)] = b;
    cumulative *= 1.0 - b;
    s.alpha_bar[static_cast<std::size_t>(i)] = cumulative;
  }

  s.sample_steps.resize(static_cast<std::size_t>(sampling_steps));
  for (int i = 0; i < sampling_steps; ++i) {
    s.sample_steps[static_cast<std::size_t>(i)] =
        static_cast<int>(static_cast<long long>(i) * t_train / sampling_steps);
  }
  return s;
}

Tensor ddim_denoise_step(const Tensor& z_t, const Tensor& eps, int t, int t_prev,
                         const NoiseSchedule& sched) {
  if (t_prev >= t || t_prev < -1) {
    throw StepOrderError("denoise step needs t > t_prev >= -1 (t=" + std::to_string(t) +
                         ", t_prev=" + std::to_string(t_prev) + ")");
  }
  if (!z_t.same_shape(eps)) {
    throw KernelError("denoise step: eps shape " + eps.shape_string() +
                      " does not match latent " + z_t.shape_string());
  }
  const double a_t = sched.alpha_bar_at(t);
  const double a_prev = sched.alpha_bar_at(t_prev);
  // x0_hat = (z_t - sqrt(1 - a_t) eps) / sqrt(a_t);
  // out    = sqrt(a_prev) x0_hat + sqrt(1 - a_prev) eps
  const double z_coef = std::sqrt(a_prev) / std::sqrt(a_t);
  const double eps_coef = std::sqrt(1.0 - a_prev) - z_coef * std::sqrt(1.0 - a_t);
  return lin_combine(z_coef, z_t, eps_coef, eps);
}

Tensor ddim_invert_step(const Tensor& z_t, const Tensor& eps, int t, int t_next,
                        const NoiseSchedule& sched) {
  if (t_next <= t || t < -1) {
    throw StepOrderError("invert step needs t_next > t >= -1 (t=" + std::to_string(t) +
                         ", t_next=" + std::to_string(t_next) + ")");
  }
  if (!z_t.same_shape(eps)) {
    throw KernelError("invert step: eps shape " + eps.shape_string() + " does not match latent " +
                      z_t.shape_string());
  }
  const double a_t = sched.alpha_bar_at(t);
  const double a_next = sched.alpha_bar_at(t_next);
  // Exact algebraic inverse of ddim_denoise_step:
  //   z_next = sqrt(a_next/a_t) z_t
  //          + sqrt(a_next) (sqrt(1/a_next - 1) - sqrt(1/a_t - 1)) eps
  const double z_coef = std::sqrt(a_next / a_t);
  const double eps_coef =
      std::sqrt(a_next) * (std::sqrt(1.0 / a_next - 1.0) - std::sqrt(1.0 / a_t - 1.0));
  return lin_combine(z_coef, z_t, eps_coef, eps);
}

}  // namespace av2v
