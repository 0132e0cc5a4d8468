#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace ego {

/// Worker count: EGO_NUM_THREADS if set and positive, else hardware concurrency.
int thread_count();

/// Runs body(begin, end) over contiguous chunks of [0, n). The body must only
/// write to state owned by its index range.
template <typename Body>
void parallel_for(size_t n, Body&& body) {
  const size_t workers = std::min<size_t>(static_cast<size_t>(thread_count()), n / 4096 + 1);
  if (workers <= 1) {
    body(size_t{0}, n);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  const size_t chunk = (n + workers - 1) / workers;
  for (size_t w = 0; w < workers; ++w) {
    const size_t b = w * chunk, e = std::min(n, b + chunk);
    if (b >= e) break;
    pool.emplace_back([&body, b, e] { body(b, e); });
  }
  for (auto& t : pool) t.join();
}

}  // namespace ego
