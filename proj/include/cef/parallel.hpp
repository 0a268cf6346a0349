#pragma once
// Dynamic trial scheduling: workers claim trial indices from a shared atomic
// counter, and each trial writes only its own slot. Results therefore do not
// depend on the worker count or the claim order.

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace cef {

// CEF_THREADS overrides; otherwise hardware concurrency.
inline int default_workers() {
  if (const char* env = std::getenv("CEF_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

template <class Fn>
void parallel_for(int n, int workers, Fn&& fn) {
  if (n <= 0) return;
  if (workers <= 0) workers = default_workers();
  workers = std::min(workers, n);
  if (workers == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  auto body = [&] {
    for (;;) {
      const int i = next.fetch_add(1, std::memory_order_relaxed);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mu);
        if (!error) error = std::current_exception();
        next.store(n);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (int w = 1; w < workers; ++w) pool.emplace_back(body);
  body();
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

// Runs fn(i) for every trial and returns the results in trial order.
template <class T, class Fn>
std::vector<T> parallel_map(int n, int workers, Fn&& fn) {
  std::vector<T> out(std::max(n, 0));
  parallel_for(n, workers, [&](int i) { out[i] = fn(i); });
  return out;
}

}  // namespace cef
