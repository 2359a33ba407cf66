// Copyright (c) 2026 av2v contributors
// SPDX-License-Identifier: Apache-2.0

#include "av2v/injection.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <tuple>

#include "av2v/media_io.hpp"

namespace fs = std::filesystem;

namespace av2v {

int InjectionPlan::active_steps(FeatureKind kind) const {
  double tau = 0.0;
  switch (kind) {
    case FeatureKind::conv_f: tau = tau_conv; break;
    case FeatureKind::spatial_q:
    case FeatureKind::spatial_k: tau = tau_sa; break;
    case FeatureKind::temporal_q:
    case FeatureKind::temporal_k: tau = tau_ta; break;
  }
  return static_cast<int>(std::lround(tau * total_steps));
}

const std::set<int>& InjectionPlan::layers(FeatureKind kind) const {
  switch (kind) {
    case FeatureKind::conv_f: return conv_layers;
    case FeatureKind::spatial_q:
    case FeatureKind::spatial_k: return spatial_layers;
    case FeatureKind::temporal_q:
    case FeatureKind::temporal_k: return temporal_layers;
  }
  throw PlanError("unknown feature kind");
}

bool InjectionPlan::should_inject(FeatureKind kind, int layer, int step_index) const {
  if (step_index < 0 || step_index >= total_steps) {
    throw PlanError("step_index " + std::to_string(step_index) + " outside [0, " +
                    std::to_string(total_steps) + ")");
  }
  return step_index < active_steps(kind) && layers(kind).count(layer) > 0;
}

std::size_t InjectionPlan::expected_cache_entries() const {
  return conv_layers.size() * static_cast<std::size_t>(active_steps(FeatureKind::conv_f)) +
         2 * spatial_layers.size() * static_cast<std::size_t>(active_steps(FeatureKind::spatial_q)) +
         2 * temporal_layers.size() *
             static_cast<std::size_t>(active_steps(FeatureKind::temporal_q));
}

void InjectionPlan::validate(int decoder_layer_count) const {
  auto check_layers = [&](const std::set<int>& layers, const char* name) {
    for (int l : layers) {
      if (l < 0 || l >= decoder_layer_count) {
        throw PlanError(std::string(name) + " layer " + std::to_string(l) +
                        " outside decoder range [0, " + std::to_string(decoder_layer_count) + ")");
      }
    }
  };
  check_layers(conv_layers, "l1");
  check_layers(spatial_layers, "l2");
  check_layers(temporal_layers, "l3");
  for (double tau : {tau_conv, tau_sa, tau_ta}) {
    if (!(tau >= 0.0 && tau <= 1.0)) {
      throw PlanError("tau thresholds must lie in [0, 1]");
    }
  }
  if (total_steps < 1) throw PlanError("plan needs total_steps >= 1");
}

bool FeatureCache::Key::operator<(const Key& o) const {
  return std::tie(step, layer, kind) < std::tie(o.step, o.layer, o.kind);
}

bool FeatureCache::contains(int step, int layer, FeatureKind kind) const {
  return entries_.count(Key{step, layer, kind}) > 0;
}

void FeatureCache::record(int step, int layer, FeatureKind kind, const Tensor& value) {
  const Key key{step, layer, kind};
  auto [it, inserted] = entries_.emplace(key, value);
  (void)it;
  if (!inserted) {
    throw CacheError(std::string("duplicate cache write for step ") + std::to_string(step) +
                     ", layer " + std::to_string(layer) + ", kind " + feature_kind_name(kind));
  }
}

const Tensor& FeatureCache::fetch(int step, int layer, FeatureKind kind) const {
  auto it = entries_.find(Key{step, layer, kind});
  if (it == entries_.end()) {
    throw CacheMissError(std::string("no cached feature for step ") + std::to_string(step) +
                         ", layer " + std::to_string(layer) + ", kind " +
                         feature_kind_name(kind) +
                         " (record and inject phases ran under different plans?)");
  }
  return it->second;
}

void FeatureCache::dump(const std::string& dir) const {
  fs::create_directories(dir);
  char name[64];
  for (const auto& [key, tensor] : entries_) {
    std::snprintf(name, sizeof(name), "f_step%03d_layer%02d_%s", key.step, key.layer,
                  feature_kind_name(key.kind));
    write_tensor((fs::path(dir) / name).string(), tensor);
  }
}

void FeatureCache::load(const std::string& dir) {
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir);
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    int step = 0, layer = 0;
    char kind_buf[32] = {0};
    if (std::sscanf(name.c_str(), "f_step%d_layer%d_%31s", &step, &layer, kind_buf) != 3) {
      continue;
    }
    auto kind = feature_kind_from_name(kind_buf);
    if (!kind) throw FormatError(name + ": unknown feature kind");
    record(step, layer, *kind, read_tensor(entry.path().string()));
  }
}

void RecordingHooks::on_feature(FeatureKind kind, int layer, Tensor& value) {
  if (plan_.should_inject(kind, layer, step_index_)) {
    cache_.record(step_index_, layer, kind, value);
  }
}

void InjectingHooks::on_feature(FeatureKind kind, int layer, Tensor& value) {
  if (!plan_.should_inject(kind, layer, step_index_)) return;
  const Tensor& cached = cache_.fetch(step_index_, layer, kind);
  if (audit_ != nullptr && value.bit_equal(cached)) audit_->pre_equal += 1;
  value = cached;
  if (audit_ != nullptr) {
    audit_->sites += 1;
    if (!value.bit_equal(cached)) audit_->mismatches += 1;
  }
}

}  // namespace av2v
