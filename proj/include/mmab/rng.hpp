#pragma once

#include <cstdint>
#include <limits>
#include <random>
#include <string_view>

namespace mmab {

/// SplitMix64 finalizer. Bijective on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b) noexcept {
  return mix64(a ^ mix64(b + 0x632be59bd9b4e019ULL));
}

constexpr std::uint64_t hash_role(std::string_view role) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (char c : role) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Key derivation for named random streams: stream_id = hash(seed, role, index).
/// Streams for different roles or indices are independent, so adding a player
/// never perturbs the environment stream or any other player's stream.
constexpr std::uint64_t stream_key(std::uint64_t seed, std::string_view role,
                                   std::uint64_t index) noexcept {
  return hash_combine(hash_combine(seed, hash_role(role)), index);
}

/// Maps a 64-bit word onto [0, 1) using the top 53 bits.
constexpr double to_unit(std::uint64_t x) noexcept {
  return static_cast<double>(x >> 11) * 0x1.0p-53;
}

/// Small counter-seeded generator satisfying UniformRandomBitGenerator.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  explicit constexpr SplitMix64(std::uint64_t state) noexcept : state_(state) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  constexpr result_type operator()() noexcept {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t state_;
};

/// Per-player engine. Seeded once per episode from the derived stream key.
using Rng = std::mt19937_64;

inline Rng make_stream(std::uint64_t seed, std::string_view role, std::uint64_t index) {
  return Rng{stream_key(seed, role, index)};
}

inline double uniform01(Rng& rng) { return to_unit(rng()); }

/// Uniform integer in [0, n).
inline int uniform_index(Rng& rng, int n) {
  return std::uniform_int_distribution<int>{0, n - 1}(rng);
}

}  // namespace mmab
