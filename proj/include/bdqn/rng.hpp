#pragma once

// Seeded random streams. The engine is std::mt19937_64 (its output sequence is
// fixed by the standard); the conversions to uniform/normal/index values are
// written out here so results do not depend on the standard library vendor's
// distribution implementations.

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace bdqn {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

class RngStream {
 public:
  explicit RngStream(std::uint64_t seed = 0) : engine_(splitmix64(seed)) {}

  std::uint64_t next_u64() {
    ++draws_;
    return engine_();
  }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). Lemire's multiply-and-reject; n must be > 0.
  std::uint64_t uniform_index(std::uint64_t n) {
    unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * n;
    auto low = static_cast<std::uint64_t>(m);
    if (low < n) {
      const std::uint64_t threshold = (0 - n) % n;
      while (low < threshold) {
        m = static_cast<unsigned __int128>(next_u64()) * n;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  bool bernoulli(double p) { return uniform() < p; }

  /// Box-Muller, one normal per two engine draws (no caching of the pair).
  double normal(double mu, double sigma) {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    return mu + sigma * z;
  }

  /// Engine outputs consumed so far.
  std::uint64_t draws() const { return draws_; }

 private:
  std::mt19937_64 engine_;
  std::uint64_t draws_ = 0;
};

/// The independent streams a training run owns. Changing one behaviour (say
/// the noise) never shifts the draws seen by any other stream.
enum class Stream : std::uint8_t {
  weights = 0,
  env,
  noop,
  epsilon,
  head_select,
  masks,
  replay_sample,
  noise,
  eval_seeds,
};

inline constexpr std::size_t kStreamCount = 9;

inline constexpr std::array<std::string_view, kStreamCount> kStreamNames = {
    "weights", "env",   "noop",          "epsilon",   "head_select",
    "masks",   "replay_sample", "noise", "eval_seeds"};

inline std::uint64_t stream_seed(std::uint64_t master, Stream s) {
  return splitmix64(master ^ splitmix64(0xB00757A9ULL + static_cast<std::uint64_t>(s)));
}

class StreamSet {
 public:
  explicit StreamSet(std::uint64_t master) {
    for (std::size_t i = 0; i < kStreamCount; ++i) {
      streams_[i] = RngStream(stream_seed(master, static_cast<Stream>(i)));
    }
  }

  RngStream& operator[](Stream s) { return streams_[static_cast<std::size_t>(s)]; }
  const RngStream& operator[](Stream s) const { return streams_[static_cast<std::size_t>(s)]; }

 private:
  std::array<RngStream, kStreamCount> streams_;
};

}  // namespace bdqn
