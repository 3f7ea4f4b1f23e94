#pragma once

#include <cstdint>
#include <initializer_list>
#include <span>

#include "covlab/errors.hpp"

namespace covlab::rng {

inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

// Finalizing 64-bit mixer (splitmix64 style).
inline constexpr std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xbf58476d1ce4e5b9ULL;
  z ^= z >> 27;
  z *= 0x94d049bb133111ebULL;
  z ^= z >> 31;
  return z;
}

// Keyed derivation: folds the words into the seed one mixing round each.
// A fixed key always maps to the same value, independent of draw order or
// scheduling, which is what makes simulations replayable in parallel.
inline constexpr std::uint64_t derive(std::uint64_t seed,
                                      std::initializer_list<std::uint64_t> words) {
  std::uint64_t h = mix64(seed + kGolden);
  for (std::uint64_t w : words) h = mix64(h ^ (w + kGolden));
  return h;
}

// Uniform double in [0, 1) from the top 53 bits.
inline constexpr double uniform01(std::uint64_t h) {
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

// Inverse-CDF draw over a pmf row, accumulating in fixed index order. Falls
// back to the last positive-mass index when rounding pushes u past the total.
inline int sample_discrete(std::span<const double> pmf, double u) {
  double c = 0.0;
  int last_pos = -1;
  for (std::size_t i = 0; i < pmf.size(); ++i) {
    if (pmf[i] > 0.0) last_pos = static_cast<int>(i);
    c += pmf[i];
    if (u < c) return static_cast<int>(i);
  }
  if (last_pos < 0) throw ValidationError("sample: all-zero pmf row");
  return last_pos;
}

// Derivation roles, the first word of every key.
enum class Role : std::uint64_t {
  source = 1,    // common sequence symbols
  side = 2,      // side sequence symbols
  codeword = 3,  // codeword symbols
  cover = 4,     // per-trial success draw on the analytic route
  trial = 5,     // per-trial seed derivation
};

inline constexpr std::uint64_t word(Role r) { return static_cast<std::uint64_t>(r); }

}  // namespace covlab::rng
