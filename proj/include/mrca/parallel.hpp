#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>

namespace mrca {

/// SplitMix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(seed ^ splitmix64(stream + 1));
}

/// Worker count from MRCA_WORKERS (default: hardware concurrency, at least 1).
int worker_count();

/// Runs fn(i) for i in [0, n). Each index is handled by exactly one worker;
/// results must be written to per-index slots for determinism.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn,
                  int workers = -1);

}  // namespace mrca
