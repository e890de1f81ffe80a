#pragma once

#include <algorithm>
#include <charconv>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <optional>
#include <string_view>
#include <thread>
#include <vector>

#include "forge/common.hpp"

namespace forge {

// Worker count: explicit value, else FORGE_THREADS, else hardware concurrency.
inline unsigned resolve_threads(std::optional<unsigned> requested = std::nullopt) {
  if (requested) {
    if (*requested == 0) throw ConfigError("thread count must be at least 1");
    return *requested;
  }
  if (const char* env = std::getenv("FORGE_THREADS"); env && *env) {
    std::string_view sv(env);
    unsigned v = 0;
    auto [ptr, ec] = std::from_chars(sv.data(), sv.data() + sv.size(), v);
    if (ec != std::errc{} || ptr != sv.data() + sv.size() || v == 0) {
      throw ConfigError("FORGE_THREADS must be a positive integer");
    }
    return v;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

// Runs fn(i) for every i in [0, n) over contiguous chunks. Callers write
// results into index-addressed slots, so output never depends on scheduling.
// The exception from the lowest failing chunk is rethrown.
template <typename Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
  if (n == 0) return;
  const std::size_t workers = std::min<std::size_t>(std::max(1u, threads), n);
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      const std::size_t lo = w * chunk;
      const std::size_t hi = std::min(n, lo + chunk);
      try {
        for (std::size_t i = lo; i < hi; ++i) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace forge
