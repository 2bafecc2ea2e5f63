#pragma once

#include <cstdint>
#include <string_view>

namespace pcprep {

// Deterministic 64-bit generator (splitmix64). Used instead of <random>
// engines and distributions so that draws are bit-identical across
// platforms, standard libraries and process restarts.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // [0, 1)
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // [lo, hi)
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  bool bernoulli(double p) { return uniform01() < p; }

 private:
  std::uint64_t state_;
};

// FNV-1a over the id bytes.
constexpr std::uint64_t stable_hash64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ull;
  }
  return h;
}

// Derives one independent stream per frame from (global_seed, frame_id).
// Identical inputs always yield identical draws, regardless of how many
// frames are processed in between or on which worker thread.
struct SeedStream {
  std::uint64_t global_seed = 0;

  std::uint64_t seed_for(std::string_view frame_id) const {
    std::uint64_t z = stable_hash64(frame_id) ^ (global_seed + 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  RngStream stream_for(std::string_view frame_id) const {
    return RngStream(seed_for(frame_id));
  }
};

}  // namespace pcprep
