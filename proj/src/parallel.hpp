#pragma once

#include <algorithm>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace pearle::detail {

/// Splits [0, n) into contiguous chunks, one per worker, and calls
/// body(begin, end) on each. The first exception thrown by a worker is
/// rethrown on the calling thread.
template <typename Body>
void parallel_chunks(long n, unsigned threads, Body&& body) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<long>(threads, std::max(1L, n)));
  if (threads <= 1) {
    body(0L, n);
    return;
  }
  std::exception_ptr error;
  std::mutex error_mutex;
  {
    std::vector<std::jthread> workers;
    const long chunk = (n + threads - 1) / threads;
    for (unsigned w = 0; w < threads; ++w) {
      const long begin = std::min<long>(n, w * chunk);
      const long end = std::min<long>(n, begin + chunk);
      workers.emplace_back([&, begin, end] {
        try {
          body(begin, end);
        } catch (...) {
          const std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      });
    }
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace pearle::detail
