#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

#include "dscat/config.hpp"

namespace dscat {

/// Worker count: DSCAT_WORKERS if set to a positive integer, else the
/// hardware concurrency.
inline std::size_t default_workers() {
  if (const char* env = std::getenv("DSCAT_WORKERS")) {
    try {
      const long v = std::stol(env);
      if (v > 0) return static_cast<std::size_t>(v);
    } catch (...) {
    }
  }
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

/// Process-wide stop request (raised by the CLI on SIGINT).
inline std::atomic<bool>& cancel_flag() {
  static std::atomic<bool> flag{false};
  return flag;
}

/// Runs body(i) for i in [0, n) on a pool of stateless workers pulling from a
/// shared counter. Results must be written to slot i by the body, which keeps
/// the output independent of the schedule. Returns the number of indices
/// started before `cancel` was raised (all of them when it never is). Without
/// an explicit `cancel` the loop watches cancel_flag() and throws Cancelled
/// when it stopped early.
template <class Body>
std::size_t parallel_for(std::size_t n, Body&& body, std::size_t workers = 0,
                         const std::atomic<bool>* cancel = nullptr) {
  const bool global = cancel == nullptr;
  if (global) cancel = &cancel_flag();
  if (workers == 0) workers = default_workers();
  workers = std::min(workers, std::max<std::size_t>(n, 1));
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> started{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  auto loop = [&] {
    for (;;) {
      if (failed.load() || cancel->load()) return;
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      started.fetch_add(1);
      try {
        body(i);
      } catch (...) {
        if (!failed.exchange(true)) failure = std::current_exception();
        return;
      }
    }
  };
  if (workers <= 1) {
    loop();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(loop);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  if (global && started.load() < n) throw Cancelled("run cancelled");
  return started.load();
}

}  // namespace dscat
