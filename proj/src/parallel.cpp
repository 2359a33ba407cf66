// Copyright (c) 2026 av2v contributors
// SPDX-License-Identifier: Apache-2.0

#include "av2v/parallel.hpp"

#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace av2v {

int thread_cap() {
  const char* env = std::getenv("AV2V_THREADS");
  if (env == nullptr || *env == '\0') return 0;
  char* end = nullptr;
  long v = std::strtol(env, &end, 10);
  if (end == env || v < 0) return 0;
  return static_cast<int>(v);
}

void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn) {
  const int cap = thread_cap();
  if (cap <= 1 || n < 2) {
    fn(0, n);
    return;
  }
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(cap), n);
  const std::size_t chunk = (n + workers - 1) / workers;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = w * chunk;
    const std::size_t end = std::min(n, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&fn, begin, end] { fn(begin, end); });
  }
  for (auto& t : pool) t.join();
}

}  // namespace av2v
