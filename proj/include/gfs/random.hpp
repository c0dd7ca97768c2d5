#pragma once

#include <cstdint>
#include <random>

namespace gfs {

using Rng = std::mt19937_64;

// SplitMix64 finalizer.
constexpr std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Seed of substream `stream` under `master`. Substreams depend only on the
/// pair, never on scheduling, so results do not change with worker count.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  return mix_seed(mix_seed(master) ^ mix_seed(stream ^ 0xD1B54A32D192ED03ULL));
}

inline Rng make_rng(std::uint64_t master, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(derive_seed(master, stream)),
                    static_cast<std::uint32_t>(derive_seed(master, stream) >> 32),
                    static_cast<std::uint32_t>(stream),
                    static_cast<std::uint32_t>(master)};
  return Rng(seq);
}

}  // namespace gfs
