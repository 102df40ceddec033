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

#include "transclip/parallel.hpp"

#include <atomic>
#include <thread>

namespace transclip {

namespace {

std::size_t hardware_threads() {
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

std::atomic<std::size_t> g_threads{0};

}  // namespace

std::size_t thread_count() {
  const std::size_t n = g_threads.load(std::memory_order_relaxed);
  return n == 0 ? hardware_threads() : n;
}

void set_thread_count(std::size_t n) {
  g_threads.store(n, std::memory_order_relaxed);
}

}  // namespace transclip
