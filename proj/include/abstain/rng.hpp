#pragma once

#include <cstdint>

namespace abstain {

// Counter-based generator: every output is a pure function of (key, counter),
// so any stream can be replayed from its seed regardless of execution order.
inline uint64_t mix64(uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline uint64_t mix64(uint64_t key, uint64_t counter) {
  return mix64(key ^ mix64(counter + 0x632be59bd9b4e019ULL));
}

// 53-bit mantissa, value in [0, 1)
inline double unit_double(uint64_t bits) { return static_cast<double>(bits >> 11) * 0x1.0p-53; }

struct CounterRng {
  uint64_t key = 0;
  uint64_t counter = 0;

  CounterRng() = default;
  explicit CounterRng(uint64_t k) : key(k) {}

  uint64_t next_u64() { return mix64(key, counter++); }
  double next_unit() { return unit_double(next_u64()); }
};

// stream tags; pool and oracle streams of one run are independently keyed
inline constexpr uint64_t kPoolStreamTag = 0x706f6f6cULL;
inline constexpr uint64_t kOracleStreamTag = 0x6f7261636c65ULL;

inline uint64_t derive_key(uint64_t seed, uint64_t tag) { return mix64(seed ^ mix64(tag)); }

}  // namespace abstain
