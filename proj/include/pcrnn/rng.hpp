#pragma once

#include <cstdint>

namespace pcrnn {

// xorshift64* generator. All randomness in the library flows through this so
// that runs are reproducible across platforms and standard-library versions.
//
// Update rule (state s is a nonzero 64-bit word):
//   s ^= s >> 12;  s ^= s << 25;  s ^= s >> 27;
//   output = s * 2685821657736338717
//
// Seeding passes the user seed through one splitmix64 step so that small
// consecutive seeds produce unrelated streams; a zero state is remapped to a
// fixed odd constant.
class Rng {
public:
  explicit Rng(uint64_t seed) { reseed(seed); }

  void reseed(uint64_t seed) {
    uint64_t z = seed + 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    z ^= z >> 31;
    state_ = z ? z : 0x9e3779b97f4a7c15ull;
  }

  uint64_t next_u64() {
    uint64_t s = state_;
    s ^= s >> 12;
    s ^= s << 25;
    s ^= s >> 27;
    state_ = s;
    return s * 2685821657736338717ull;
  }

  // Uniform double in [0, 1) with 53 random bits.
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform double in [lo, hi).
  double uniform(double lo, double hi) { return lo + next_unit() * (hi - lo); }

  uint64_t state() const { return state_; }
  void set_state(uint64_t s) { state_ = s ? s : 0x9e3779b97f4a7c15ull; }

private:
  uint64_t state_;
};

}  // namespace pcrnn
