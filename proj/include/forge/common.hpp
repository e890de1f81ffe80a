#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace forge {

inline constexpr int kSchemaVersion = 1;

// Bad or unreadable input data. The CLI maps this to exit status 1.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration or flags. The CLI maps this to exit status 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

constexpr std::uint64_t fnv1a64(std::string_view bytes,
                                std::uint64_t h = kFnvOffset) noexcept {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= kFnvPrime;
  }
  return h;
}

// splitmix64 finalizer: a bijective avalanche mix of a 64-bit word.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Independent 64-bit stream seed for (seed, stream) pairs.
constexpr std::uint64_t derive_seed(std::uint64_t seed,
                                    std::uint64_t stream) noexcept {
  return mix64(mix64(seed) ^ mix64(stream ^ 0xd1b54a32d192ed03ULL));
}

// Maps 64 random bits onto [0, 1) with 53-bit resolution.
constexpr double unit_interval(std::uint64_t bits) noexcept {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

// Seeded hash of a string in [0, 1); used for order-independent sampling.
constexpr double hash_unit(std::string_view key, std::uint64_t seed,
                           std::uint64_t stream = 0) noexcept {
  return unit_interval(mix64(fnv1a64(key) ^ derive_seed(seed, stream)));
}

// Reproducible random source. Only the engine's raw output sequence is used
// (it is fixed by the standard), so streams are identical across standard
// library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  double uniform() { return unit_interval(engine_()); }

  // Unbiased integer in [0, n), n > 0.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = (~std::uint64_t{0}) - ((~std::uint64_t{0}) % n);
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  // Number of Bernoulli(p) trials up to and including the first success,
  // clipped to max_len.
  std::size_t geometric(double p, std::size_t max_len) {
    std::size_t len = 1;
    while (len < max_len && uniform() >= p) ++len;
    return len;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace forge
