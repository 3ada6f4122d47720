#pragma once

#include <atomic>
#include <cstdint>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

#include "mvq/rng.hpp"

namespace mvq {

// Deterministic per-instance generator: a pure function of (seed, index), so
// results do not depend on how instances are scheduled across threads.
inline Rng instance_rng(std::uint64_t seed, std::uint64_t index) {
  return Rng(seed ^ (0x9e3779b97f4a7c15ull * (index + 1)));
}

// Runs fn(0..n-1) on up to `threads` workers and returns the results in
// index order. fn must not touch shared mutable state; determinism then
// holds for any thread count. The first exception thrown by any worker is
// rethrown after the pool drains.
template <typename R, typename Fn>
std::vector<R> parallel_map(std::size_t n, unsigned threads, Fn&& fn) {
  std::vector<R> out(n);
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) out[i] = fn(i);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mu;
  auto worker = [&] {
    while (!failed.load(std::memory_order_relaxed)) {
      std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        out[i] = fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mu);
        if (!error) error = std::current_exception();
        failed.store(true);
      }
    }
  };
  std::vector<std::thread> pool;
  const unsigned count = std::min<unsigned>(threads, static_cast<unsigned>(n));
  pool.reserve(count);
  for (unsigned i = 0; i < count; ++i) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
  return out;
}

}  // namespace mvq
