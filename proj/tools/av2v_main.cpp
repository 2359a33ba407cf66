// Copyright (c) 2026 av2v contributors
// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end. Links only the C API so it exercises the same
// surface any other binding would.

#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "av2v.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitRuntime = 3;

void print_progress(const char* line, void* /*user*/) { std::fprintf(stderr, "%s\n", line); }

int status_to_exit(av2v_status status) {
  switch (status) {
    case AV2V_OK:
      return kExitOk;
    case AV2V_ERR_ARGUMENT:
    case AV2V_ERR_CONFIG:
      return kExitUsage;
    default:
      return kExitRuntime;
  }
}

int fail(av2v_status status) {
  std::fprintf(stderr, "error: %s\n", av2v_last_error());
  return status_to_exit(status);
}

struct SessionGuard {
  av2v_session* handle = nullptr;
  ~SessionGuard() { av2v_session_close(handle); }
};

// Pulls one `key = value` line out of the resolved configuration; used to
// let config-file path keys serve as flag defaults.
std::string resolved_key(av2v_session* session, const std::string& key) {
  size_t needed = 0;
  if (av2v_session_resolved_config(session, nullptr, 0, &needed) != AV2V_OK) return "";
  std::vector<char> buf(needed);
  av2v_session_resolved_config(session, buf.data(), buf.size(), &needed);
  const std::string text(buf.data());
  const std::string prefix = key + " = ";
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    const std::string line = text.substr(pos, end - pos);
    if (line.rfind(prefix, 0) == 0) return line.substr(prefix.size());
    pos = end + 1;
  }
  return "";
}

int open_session(const std::string& config_path, SessionGuard& guard) {
  const av2v_status status = av2v_session_open(config_path.c_str(), &guard.handle);
  if (status != AV2V_OK) return fail(status);
  av2v_session_set_progress(guard.handle, &print_progress, nullptr);
  return kExitOk;
}

// Flag value if given, else the config-file default; empty is an error.
int require_path(av2v_session* session, std::string& value, const std::string& key,
                 const std::string& flag = "") {
  if (value.empty()) value = resolved_key(session, key);
  if (value.empty()) {
    std::fprintf(stderr, "error: missing --%s (no '%s' key in config either)\n",
                 (flag.empty() ? key : flag).c_str(), key.c_str());
    return kExitUsage;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"av2v: first-frame-guided video editing on a deterministic toy diffusion model"};
  app.require_subcommand(1);

  std::string config_path, frames_dir, out_dir, ladder_dir, edited_frame, prompt, csv_path;
  bool dump_features = false;
  bool with_pgm = false;

  CLI::App* cmd_invert = app.add_subcommand("invert", "DDIM-invert a frame directory");
  cmd_invert->add_option("--config", config_path, "run configuration file")->required();
  cmd_invert->add_option("--frames", frames_dir, "source frame directory (frame_*.ppm)");
  cmd_invert->add_option("--out", out_dir, "output directory for the noise ladder");

  CLI::App* cmd_recon = app.add_subcommand("reconstruct", "denoise a stored noise ladder");
  cmd_recon->add_option("--config", config_path, "run configuration file")->required();
  cmd_recon->add_option("--ladder", ladder_dir, "ladder directory from `invert`");
  cmd_recon->add_option("--out", out_dir, "output directory for reconstructed frames");
  cmd_recon->add_flag("--dump-features", dump_features,
                      "also write the recorded feature cache under <out>/features");

  CLI::App* cmd_edit = app.add_subcommand("edit", "full edit: invert, record, guided denoise");
  cmd_edit->add_option("--config", config_path, "run configuration file")->required();
  cmd_edit->add_option("--frames", frames_dir, "source frame directory");
  cmd_edit->add_option("--edited-first-frame", edited_frame, "edited first frame (P6 pixmap)");
  cmd_edit->add_option("--prompt", prompt, "target prompt");
  cmd_edit->add_option("--out", out_dir, "output directory for edited frames");

  CLI::App* cmd_features = app.add_subcommand("features", "visualize decoder-layer features");
  cmd_features->add_option("--config", config_path, "run configuration file")->required();
  cmd_features->add_option("--ladder", ladder_dir, "ladder directory from `invert`");
  cmd_features->add_option("--out", out_dir, "output directory for visualization tensors");
  cmd_features->add_flag("--pgm", with_pgm, "also write grayscale pixmaps");

  CLI::App* cmd_metrics = app.add_subcommand("metrics", "consecutive-frame consistency score");
  cmd_metrics->add_option("--config", config_path, "run configuration file (defaults used if omitted)");
  cmd_metrics->add_option("--frames", frames_dir, "frame directory to score");
  cmd_metrics->add_option("--csv", csv_path, "write per-pair cosines to this CSV file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  SessionGuard session;
  if (cmd_metrics->parsed() && config_path.empty()) {
    // metrics works with the built-in defaults
    const av2v_status status = av2v_session_open_text("", &session.handle);
    if (status != AV2V_OK) return fail(status);
  } else {
    const int code = open_session(config_path, session);
    if (code != kExitOk) return code;
  }

  av2v_status status = AV2V_OK;
  if (cmd_invert->parsed()) {
    int rc = require_path(session.handle, frames_dir, "frames");
    if (rc == kExitOk) rc = require_path(session.handle, out_dir, "out");
    if (rc != kExitOk) return rc;
    status = av2v_run_invert(session.handle, frames_dir.c_str(), out_dir.c_str());
  } else if (cmd_recon->parsed()) {
    int rc = require_path(session.handle, ladder_dir, "ladder");
    if (rc == kExitOk) rc = require_path(session.handle, out_dir, "out");
    if (rc != kExitOk) return rc;
    status = av2v_run_reconstruct(session.handle, ladder_dir.c_str(), out_dir.c_str(),
                                  dump_features ? 1 : 0);
  } else if (cmd_edit->parsed()) {
    int rc = require_path(session.handle, frames_dir, "frames");
    if (rc == kExitOk) {
      rc = require_path(session.handle, edited_frame, "edited_first_frame", "edited-first-frame");
    }
    if (rc == kExitOk) rc = require_path(session.handle, out_dir, "out");
    if (rc != kExitOk) return rc;
    if (prompt.empty()) prompt = resolved_key(session.handle, "prompt");
    status = av2v_run_edit(session.handle, frames_dir.c_str(), edited_frame.c_str(),
                           prompt.c_str(), out_dir.c_str());
  } else if (cmd_features->parsed()) {
    int rc = require_path(session.handle, ladder_dir, "ladder");
    if (rc == kExitOk) rc = require_path(session.handle, out_dir, "out");
    if (rc != kExitOk) return rc;
    status = av2v_run_features(session.handle, ladder_dir.c_str(), out_dir.c_str(),
                               with_pgm ? 1 : 0);
  } else if (cmd_metrics->parsed()) {
    int rc = require_path(session.handle, frames_dir, "frames");
    if (rc != kExitOk) return rc;
    double score = 0.0;
    status = av2v_run_metrics(session.handle, frames_dir.c_str(),
                              csv_path.empty() ? nullptr : csv_path.c_str(), &score);
    if (status == AV2V_OK) std::printf("%.10f\n", score);
  }

  if (status != AV2V_OK) return fail(status);
  return kExitOk;
}
