#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace dcattack::detail {

// Runs body(i) for i in [0, count) on up to `threads` workers. Exceptions
// must be handled inside body.
inline void parallel_for(int count, int threads, const std::function<void(int)>& body) {
  threads = std::max(1, std::min(threads, count));
  if (threads == 1) {
    for (int i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&]() {
      for (int i = next++; i < count; i = next++) body(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace dcattack::detail
