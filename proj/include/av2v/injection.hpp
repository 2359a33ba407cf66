// Copyright (c) 2026 av2v contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <map>
#include <set>
#include <string>

#include "av2v/tensor.hpp"
#include "av2v/unet.hpp"

namespace av2v {

// Which decoder layers receive which feature replacements, and for how many
// of the early sampling steps. Thresholds are fractions of total_steps; a
// site is active while step_index < round(tau * total_steps).
struct InjectionPlan {
  std::set<int> conv_layers{4};
  std::set<int> spatial_layers{4, 5, 6, 7, 8, 9, 10, 11};
  std::set<int> temporal_layers{4, 5, 6, 7, 8, 9, 10, 11};
  double tau_conv = 0.2;
  double tau_sa = 0.2;
  double tau_ta = 0.5;
  int total_steps = 50;

  // Number of early steps a kind stays active: round(tau * T).
  int active_steps(FeatureKind kind) const;

  const std::set<int>& layers(FeatureKind kind) const;

  // True iff `layer` is planned for `kind` and step_index falls in the
  // active window. Same predicate gates recording and injection.
  bool should_inject(FeatureKind kind, int layer, int step_index) const;

  // Closed-form cache entry count for a full recording pass:
  // |l1|*round(tau_conv*T) + 2|l2|*round(tau_sa*T) + 2|l3|*round(tau_ta*T).
  std::size_t expected_cache_entries() const;

  void validate(int decoder_layer_count) const;
};

// Write-once store of recorded source-branch features keyed by
// (step, layer, kind).
class FeatureCache {
 public:
  struct Key {
    int step;
    int layer;
    FeatureKind kind;
    bool operator<(const Key& o) const;
  };

  bool empty() const { return entries_.empty(); }
  std::size_t size() const { return entries_.size(); }
  bool contains(int step, int layer, FeatureKind kind) const;

  // Deep-copies value; a duplicate key is a cache error.
  void record(int step, int layer, FeatureKind kind, const Tensor& value);

  // A missing key signals a record/inject plan mismatch and is a hard error.
  const Tensor& fetch(int step, int layer, FeatureKind kind) const;

  const std::map<Key, Tensor>& entries() const { return entries_; }

  // One tensor file per entry, named f_step%03d_layer%02d_<kind>.
  void dump(const std::string& dir) const;
  void load(const std::string& dir);

 private:
  std::map<Key, Tensor> entries_;
};

// Records planned sites from the source branch. The pipeline advances
// step_index before each sampling step.
class RecordingHooks : public FeatureHooks {
 public:
  RecordingHooks(const InjectionPlan& plan, FeatureCache& cache) : plan_(plan), cache_(cache) {}
  void set_step(int step_index) { step_index_ = step_index; }
  void on_feature(FeatureKind kind, int layer, Tensor& value) override;

 private:
  const InjectionPlan& plan_;
  FeatureCache& cache_;
  int step_index_ = 0;
};

// Counters filled in by InjectingHooks when attached. mismatches counts
// sites where the post-replacement tensor failed the bit-exact comparison
// against the cache (always zero unless the plumbing is broken); pre_equal
// counts sites whose locally computed feature already matched the cache
// bit-exactly, which is every site on an identity edit.
struct InjectionAudit {
  std::size_t sites = 0;
  std::size_t mismatches = 0;
  std::size_t pre_equal = 0;
};

// Replaces planned sites with cached source features.
class InjectingHooks : public FeatureHooks {
 public:
  InjectingHooks(const InjectionPlan& plan, const FeatureCache& cache,
                 InjectionAudit* audit = nullptr)
      : plan_(plan), cache_(cache), audit_(audit) {}
  void set_step(int step_index) { step_index_ = step_index; }
  void on_feature(FeatureKind kind, int layer, Tensor& value) override;

 private:
  const InjectionPlan& plan_;
  const FeatureCache& cache_;
  InjectionAudit* audit_;
  int step_index_ = 0;
};

}  // namespace av2v
