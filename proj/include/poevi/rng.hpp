#pragma once

#include <cstdint>
#include <random>

namespace poevi {

using RngEngine = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Counter-based stream derivation: (root key, index) -> independent key.
// Batch draw b always uses split_key(root, b), so results do not depend on
// how a batch is partitioned across workers.
inline std::uint64_t split_key(std::uint64_t root, std::uint64_t index) {
  return splitmix64(root ^ splitmix64(index + 0xD1B54A32D192ED03ull));
}

inline RngEngine engine_for(std::uint64_t key) { return RngEngine(key); }

inline RngEngine engine_for(std::uint64_t root, std::uint64_t index) {
  return RngEngine(split_key(root, index));
}

}  // namespace poevi
