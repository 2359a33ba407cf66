// Copyright (c) 2026 av2v contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>

namespace av2v {

// Thread cap from AV2V_THREADS. 0 or unset selects the sequential reference
// path; any parallel path must be bit-identical to it, which parallel_for
// guarantees by only partitioning independent output elements.
int thread_cap();

// Runs fn(begin, end) over a partition of [0, n). With a cap of 0 or 1 the
// single call fn(0, n) runs on the calling thread.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace av2v
