// Copyright (c) 2026 av2v contributors
// SPDX-License-Identifier: Apache-2.0

#include "av2v.h"

#include <cstring>
#include <string>

#include "av2v/runs.hpp"

namespace {

thread_local std::string g_last_error = "no error";

struct ProgressBinding {
  av2v_progress_fn fn = nullptr;
  void* user = nullptr;
};

av2v_status map_error(av2v::ErrorCode code) {
  using av2v::ErrorCode;
  switch (code) {
    case ErrorCode::config:
    case ErrorCode::plan:
      return AV2V_ERR_CONFIG;
    case ErrorCode::kernel_domain:
    case ErrorCode::step_order:
    case ErrorCode::conditioning:
    case ErrorCode::divergence:
    case ErrorCode::pipeline:
    case ErrorCode::metric:
      return AV2V_ERR_NUMERIC;
    case ErrorCode::cache:
    case ErrorCode::cache_miss:
      return AV2V_ERR_CACHE;
    case ErrorCode::format:
      return AV2V_ERR_FORMAT;
    case ErrorCode::io:
      return AV2V_ERR_IO;
  }
  return AV2V_ERR_INTERNAL;
}

template <typename Fn>
av2v_status guarded(Fn&& fn) {
  try {
    fn();
    return AV2V_OK;
  } catch (const av2v::Error& e) {
    g_last_error = e.what();
    return map_error(e.code());
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return AV2V_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown failure";
    return AV2V_ERR_INTERNAL;
  }
}

av2v_status set_argument_error(const char* msg) {
  g_last_error = msg;
  return AV2V_ERR_ARGUMENT;
}

}  // namespace

struct av2v_session {
  av2v::Runner runner;
  ProgressBinding progress;

  explicit av2v_session(av2v::RunConfig cfg) : runner(std::move(cfg)) {}
};

extern "C" {

const char* av2v_version(void) { return "1.0.0"; }

const char* av2v_last_error(void) { return g_last_error.c_str(); }

av2v_status av2v_session_open(const char* config_path, av2v_session** out_session) {
  if (config_path == nullptr || out_session == nullptr) {
    return set_argument_error("av2v_session_open: null argument");
  }
  *out_session = nullptr;
  return guarded([&] {
    auto cfg = av2v::RunConfig::parse_file(config_path);
    *out_session = new av2v_session(std::move(cfg));
  });
}

av2v_status av2v_session_open_text(const char* config_text, av2v_session** out_session) {
  if (config_text == nullptr || out_session == nullptr) {
    return set_argument_error("av2v_session_open_text: null argument");
  }
  *out_session = nullptr;
  return guarded([&] {
    auto cfg = av2v::RunConfig::parse_text(config_text);
    *out_session = new av2v_session(std::move(cfg));
  });
}

void av2v_session_close(av2v_session* session) { delete session; }

av2v_status av2v_session_set_progress(av2v_session* session, av2v_progress_fn fn, void* user) {
  if (session == nullptr) return set_argument_error("null session");
  session->progress = {fn, user};
  if (fn == nullptr) {
    session->runner.set_progress({});
  } else {
    ProgressBinding binding = session->progress;
    session->runner.set_progress(
        [binding](const std::string& line) { binding.fn(line.c_str(), binding.user); });
  }
  return AV2V_OK;
}

av2v_status av2v_session_resolved_config(av2v_session* session, char* buf, size_t buf_len,
                                         size_t* needed) {
  if (session == nullptr) return set_argument_error("null session");
  const std::string text = session->runner.resolved_config();
  if (needed != nullptr) *needed = text.size() + 1;
  if (buf != nullptr && buf_len > 0) {
    const size_t n = std::min(buf_len - 1, text.size());
    std::memcpy(buf, text.data(), n);
    buf[n] = '\0';
  }
  return AV2V_OK;
}

av2v_status av2v_run_invert(av2v_session* session, const char* frames_dir, const char* out_dir) {
  if (session == nullptr || frames_dir == nullptr || out_dir == nullptr) {
    return set_argument_error("av2v_run_invert: null argument");
  }
  return guarded([&] { session->runner.invert(frames_dir, out_dir); });
}

av2v_status av2v_run_reconstruct(av2v_session* session, const char* ladder_dir,
                                 const char* out_dir, int dump_features) {
  if (session == nullptr || ladder_dir == nullptr || out_dir == nullptr) {
    return set_argument_error("av2v_run_reconstruct: null argument");
  }
  return guarded([&] { session->runner.reconstruct(ladder_dir, out_dir, dump_features != 0); });
}

av2v_status av2v_run_edit(av2v_session* session, const char* frames_dir,
                          const char* edited_first_frame, const char* target_prompt,
                          const char* out_dir) {
  if (session == nullptr || frames_dir == nullptr || edited_first_frame == nullptr ||
      target_prompt == nullptr || out_dir == nullptr) {
    return set_argument_error("av2v_run_edit: null argument");
  }
  return guarded(
      [&] { session->runner.edit(frames_dir, edited_first_frame, target_prompt, out_dir); });
}

av2v_status av2v_run_features(av2v_session* session, const char* ladder_dir, const char* out_dir,
                              int write_pgm) {
  if (session == nullptr || ladder_dir == nullptr || out_dir == nullptr) {
    return set_argument_error("av2v_run_features: null argument");
  }
  return guarded([&] { session->runner.features(ladder_dir, out_dir, write_pgm != 0); });
}

av2v_status av2v_run_metrics(av2v_session* session, const char* frames_dir, const char* csv_path,
                             double* score_out) {
  if (session == nullptr || frames_dir == nullptr || score_out == nullptr) {
    return set_argument_error("av2v_run_metrics: null argument");
  }
  return guarded([&] {
    *score_out = session->runner.metrics(frames_dir, csv_path != nullptr ? csv_path : "");
  });
}

}  // extern "C"
