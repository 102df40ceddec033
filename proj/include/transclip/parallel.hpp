// Copyright 2026 The transclip Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace transclip {

// Row chunk used by every reduction. Partials are produced per chunk and
// merged in chunk order, so results do not depend on the worker count.
inline constexpr std::size_t kRowChunk = 1024;

std::size_t thread_count();
// 0 selects hardware parallelism.
void set_thread_count(std::size_t n);

inline std::size_t chunk_count(std::size_t n, std::size_t chunk = kRowChunk) {
  return (n + chunk - 1) / chunk;
}

// Runs fn(task) for task in [0, n_tasks) on up to thread_count() workers.
// Tasks are claimed dynamically; the first exception thrown is rethrown.
template <class F>
void parallel_for(std::size_t n_tasks, F&& fn) {
  const std::size_t workers = std::min(thread_count(), n_tasks);
  if (workers <= 1) {
    for (std::size_t t = 0; t < n_tasks; ++t) fn(t);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto body = [&] {
    for (;;) {
      const std::size_t t = next.fetch_add(1);
      if (t >= n_tasks) return;
      try {
        fn(t);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next.store(n_tasks);
        return;
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers - 1);
    for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(body);
    body();
  }
  if (error) std::rethrow_exception(error);
}

// Calls fn(begin, end) over fixed-size row ranges covering [0, n).
template <class F>
void parallel_rows(std::size_t n, F&& fn, std::size_t chunk = kRowChunk) {
  parallel_for(chunk_count(n, chunk), [&](std::size_t c) {
    const std::size_t begin = c * chunk;
    fn(begin, std::min(n, begin + chunk));
  });
}

}  // namespace transclip
