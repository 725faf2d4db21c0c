#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "conceptprobe/error.hpp"

namespace cprobe::detail {

// Runs body(i) for i in [0, n) on up to `workers` threads. The first failure
// stops new work; it is rethrown with `label(i)` prepended when it is a
// cprobe::Error.
inline void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& body,
                         const std::function<std::string(std::size_t)>& label) {
  if (n == 0) return;
  const auto threads = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(workers, 1)), 1, n);
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::mutex mu;
  std::exception_ptr first;
  std::size_t first_index = 0;

  auto run = [&] {
    while (!failed.load()) {
      const auto i = next.fetch_add(1);
      if (i >= n) return;
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!first || i < first_index) {
          first = std::current_exception();
          first_index = i;
        }
        failed.store(true);
      }
    }
  };

  if (threads == 1) {
    run();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(run);
    for (auto& t : pool) t.join();
  }
  if (!first) return;
  try {
    std::rethrow_exception(first);
  } catch (const Error& e) {
    throw Error(e.kind(), label(first_index) + ": " + e.what());
  }
}

}  // namespace cprobe::detail
