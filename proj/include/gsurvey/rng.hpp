#pragma once

// Random streams.
//
// Everything stochastic in the toolkit takes one 64-bit master seed. Work that
// is split into tasks (simulation replications, bootstrap resamples) seeds
// each task from substream_seed(master, task_index), so the output of task k
// never depends on which thread ran it or in what order.
//
// The engine is std::mt19937_64, whose output sequence is fixed by the
// standard. Distribution objects come from <random>; their algorithms are
// library-specific, so bit-identical results are guaranteed per standard
// library build, not across standard library vendors.

#include <cstdint>
#include <random>

namespace gsurvey {

using Seed = std::uint64_t;
using Rng = std::mt19937_64;

// SplitMix64 finalizer (Steele, Lea & Flood 2014).
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Seed for task `index` of a run driven by `master`:
//   splitmix64(splitmix64(master) ^ splitmix64(index + golden))
// Both arguments are mixed before combining so neighbouring masters and
// neighbouring indices land far apart.
constexpr Seed substream_seed(Seed master, std::uint64_t index) noexcept {
  return splitmix64(splitmix64(master) ^ splitmix64(index + 0x632BE59BD9B4E019ULL));
}

// Independent streams used inside one task, e.g. the latent state and the
// replicate draws of one simulated survey.
enum class Stream : std::uint64_t {
  kPersona = 1,
  kLatent = 2,
  kResponses = 3,
  kPermutation = 4,
  kSubsample = 5,
  kBootstrap = 6,
  kSplit = 7,
  kLatentB = 8,
};

constexpr Seed stream_seed(Seed seed, Stream stream) noexcept {
  return substream_seed(seed ^ 0xD1B54A32D192ED03ULL, static_cast<std::uint64_t>(stream));
}

inline Rng make_rng(Seed seed) { return Rng(seed); }

}  // namespace gsurvey
