#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace brdsgd {

// Purpose tags separate the random streams used by different parts of a run.
enum class StreamPurpose : std::uint64_t {
  Sampling = 1,
  Attack = 2,
  Init = 3,
  Data = 4,
  Victim = 5,
  Roles = 6,
  Graph = 7,
  Contraction = 8,
  Probe = 9,
  Replacement = 10,
};

inline std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Derives a stream seed from a run seed plus an ordered list of keys
// (purpose, agent, step, ...). Two calls with equal keys give equal streams,
// which is what makes paired runs and checkpoint/resume reproducible.
inline std::uint64_t stream_seed(std::uint64_t seed, StreamPurpose purpose,
                                 std::initializer_list<std::uint64_t> keys = {}) {
  std::uint64_t h = splitmix64(seed ^ 0x5851f42d4c957f2dULL);
  h = splitmix64(h ^ static_cast<std::uint64_t>(purpose));
  for (std::uint64_t k : keys) h = splitmix64(h ^ (k + 0x632be59bd9b4e019ULL));
  return h;
}

inline std::mt19937_64 make_stream(std::uint64_t seed, StreamPurpose purpose,
                                   std::initializer_list<std::uint64_t> keys = {}) {
  return std::mt19937_64(stream_seed(seed, purpose, keys));
}

}  // namespace brdsgd
