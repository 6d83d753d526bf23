#pragma once

#include <algorithm>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace cbsde {

/// Runs f(chunk) for chunk in [0, chunks) on up to `threads` workers.
///
/// Work is split by chunk index, never by thread, so any per-chunk results
/// the caller reduces in index order are independent of the thread count.
template <class F>
void parallel_chunks(int chunks, int threads, F&& f) {
  threads = std::clamp(threads, 1, std::max(chunks, 1));
  if (threads == 1) {
    for (int c = 0; c < chunks; ++c) f(c);
    return;
  }
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> workers;
  workers.reserve(threads);
  for (int w = 0; w < threads; ++w) {
    workers.emplace_back([&, w] {
      try {
        for (int c = w; c < chunks; c += threads) f(c);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  for (auto& t : workers) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace cbsde
