/* Copyright (c) 2026 av2v contributors
 * SPDX-License-Identifier: Apache-2.0
 *
 * C interface to the av2v video-editing pipeline. All state lives behind an
 * opaque session handle created from a run configuration; every call returns
 * a status code and leaves a human-readable message for av2v_last_error()
 * on failure. Handles are not thread-safe; use one session per thread.
 */

#ifndef AV2V_H
#define AV2V_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum av2v_status {
  AV2V_OK = 0,
  AV2V_ERR_ARGUMENT = 1, /* null handle or invalid parameter */
  AV2V_ERR_CONFIG = 2,   /* bad configuration or injection plan */
  AV2V_ERR_NUMERIC = 3,  /* kernel domain, step order, divergence */
  AV2V_ERR_CACHE = 4,    /* feature-cache misuse or record/inject mismatch */
  AV2V_ERR_FORMAT = 5,   /* malformed tensor/pixmap/ladder files */
  AV2V_ERR_IO = 6,       /* filesystem failure */
  AV2V_ERR_INTERNAL = 7
} av2v_status;

typedef struct av2v_session av2v_session;

/* One line per sampling step, e.g. "edit step=3/50 t=940". */
typedef void (*av2v_progress_fn)(const char* line, void* user);

const char* av2v_version(void);

/* Message for the most recent failure on this thread; never NULL. */
const char* av2v_last_error(void);

/* Build a session from a `key = value` configuration file or from literal
 * configuration text. Unknown keys are rejected. */
av2v_status av2v_session_open(const char* config_path, av2v_session** out_session);
av2v_status av2v_session_open_text(const char* config_text, av2v_session** out_session);
void av2v_session_close(av2v_session* session);

av2v_status av2v_session_set_progress(av2v_session* session, av2v_progress_fn fn, void* user);

/* Copies the resolved configuration (all keys, defaults filled in) into buf.
 * *needed receives the full length including the terminator; the copy is
 * truncated if buf_len is too small. buf may be NULL to query the size. */
av2v_status av2v_session_resolved_config(av2v_session* session, char* buf, size_t buf_len,
                                         size_t* needed);

/* frames_dir (frame_*.ppm) -> out_dir/z_step_%03d + resolved.cfg */
av2v_status av2v_run_invert(av2v_session* session, const char* frames_dir, const char* out_dir);

/* ladder -> reconstructed frames; dump_features != 0 also writes the
 * recorded feature cache under out_dir/features. */
av2v_status av2v_run_reconstruct(av2v_session* session, const char* ladder_dir,
                                 const char* out_dir, int dump_features);

/* Full second stage: invert frames_dir, record source features, denoise the
 * edit branch conditioned on the edited first frame (a P6 pixmap) and the
 * target prompt. Writes frames, resolved.cfg and progress.log. */
av2v_status av2v_run_edit(av2v_session* session, const char* frames_dir,
                          const char* edited_first_frame, const char* target_prompt,
                          const char* out_dir);

/* ladder -> per-step visualization tensors (viz_step%03d_layer%02d_*);
 * write_pgm != 0 adds grayscale pixmaps next to them. */
av2v_status av2v_run_features(av2v_session* session, const char* ladder_dir, const char* out_dir,
                              int write_pgm);

/* Consecutive-frame consistency score in [-1, 1]. csv_path may be NULL. */
av2v_status av2v_run_metrics(av2v_session* session, const char* frames_dir, const char* csv_path,
                             double* score_out);

#ifdef __cplusplus
}
#endif

#endif /* AV2V_H */
