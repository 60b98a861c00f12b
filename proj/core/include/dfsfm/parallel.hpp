#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <thread>
#include <vector>

namespace dfsfm {

namespace detail {
inline std::atomic<int> g_thread_count{0};  // 0 = use hardware concurrency
}

inline void SetThreadCount(int n) { detail::g_thread_count.store(n < 0 ? 0 : n); }

inline int GetThreadCount() {
  const int n = detail::g_thread_count.load();
  if (n > 0) return n;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Run fn(i) for every i in [begin, end) across worker threads.
///
/// Workers receive static contiguous chunks, so the set of calls — and any
/// writes to disjoint per-index slots — is identical for every thread count.
/// Callers must not fold results across indices inside fn; reductions happen
/// sequentially afterwards to keep floating-point sums deterministic.
template <typename Fn>
void ParallelFor(std::int64_t begin, std::int64_t end, const Fn& fn) {
  const std::int64_t count = end - begin;
  if (count <= 0) return;
  const int threads = std::min<std::int64_t>(GetThreadCount(), count);
  if (threads <= 1) {
    for (std::int64_t i = begin; i < end; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(threads));
  std::exception_ptr first_error;
  std::atomic<bool> failed{false};
  const std::int64_t chunk = (count + threads - 1) / threads;
  for (int w = 0; w < threads; ++w) {
    const std::int64_t lo = begin + w * chunk;
    const std::int64_t hi = std::min(end, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([&, lo, hi]() {
      try {
        for (std::int64_t i = lo; i < hi; ++i) fn(i);
      } catch (...) {
        bool expected = false;
        if (failed.compare_exchange_strong(expected, true)) first_error = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace dfsfm
