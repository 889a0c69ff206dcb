#pragma once

#include <cstdint>

namespace camp {

/// Counter-based deterministic generator (SplitMix64). The i-th output is a
/// pure function of (seed, i): state walks the Weyl sequence
/// seed + i * 0x9E3779B97F4A7C15 and each output is the finalizer mix of one
/// state. Identical seeds give identical streams on every platform; uniform
/// and normal draws use only IEEE-754 double arithmetic on top of the
/// integer stream.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64();

  /// Uniform double in [0, 1), 53 random bits.
  double uniform();
  double uniform(double lo, double hi);

  /// Uniform integer in [0, n). Index derived as floor(uniform() * n); the
  /// bias is below 1e-13 for any n this codebase uses.
  int64_t uniform_index(int64_t n);

  /// Standard normal via Box-Muller; the paired draw is cached.
  double normal();

  /// Independent child stream keyed by (this seed, key). Used to hand out
  /// per-task / per-episode streams without coupling their draw counts.
  Rng child(uint64_t key) const;

  static uint64_t mix(uint64_t x);

 private:
  uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace camp
