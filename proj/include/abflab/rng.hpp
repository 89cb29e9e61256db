#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace abflab::rng {

using Counter = std::array<std::uint32_t, 4>;
using Key = std::array<std::uint32_t, 2>;

/// Philox4x32 with 10 rounds (Salmon et al. constants).
inline Counter philox4x32(Counter c, Key k) {
  constexpr std::uint32_t M0 = 0xD2511F53u;
  constexpr std::uint32_t M1 = 0xCD9E8D57u;
  constexpr std::uint32_t W0 = 0x9E3779B9u;
  constexpr std::uint32_t W1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      k[0] += W0;
      k[1] += W1;
    }
    const std::uint64_t p0 = static_cast<std::uint64_t>(M0) * c[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(M1) * c[2];
    c = {static_cast<std::uint32_t>(p1 >> 32) ^ c[1] ^ k[0], static_cast<std::uint32_t>(p1),
         static_cast<std::uint32_t>(p0 >> 32) ^ c[3] ^ k[1], static_cast<std::uint32_t>(p0)};
  }
  return c;
}

inline Key key_from_seed(std::uint64_t seed) {
  return {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
}

/// Uniform in the open interval (0, 1) from two 32-bit words (53 bits).
inline double open_unit(std::uint32_t hi, std::uint32_t lo) {
  const std::uint64_t bits = (static_cast<std::uint64_t>(hi >> 5) << 26) | (lo >> 6);
  return (static_cast<double>(bits) + 0.5) * 0x1p-53;
}

struct Gaussian2 {
  double g0;
  double g1;
};

/// Two independent standard normals by Box-Muller from one Philox block.
inline Gaussian2 box_muller(const Counter& r) {
  const double u1 = open_unit(r[0], r[1]);
  const double u2 = open_unit(r[2], r[3]);
  const double rad = std::sqrt(-2.0 * std::log(u1));
  const double th = 2.0 * std::numbers::pi * u2;
  return {rad * std::cos(th), rad * std::sin(th)};
}

enum class Stream : std::uint32_t { dynamics = 0, init = 1 };

/// Block for (particle, step) in a stream; the whole sequence is a pure function of the seed.
inline Counter draw(std::uint64_t seed, std::uint64_t particle, std::uint64_t step, Stream stream) {
  return philox4x32({static_cast<std::uint32_t>(particle), static_cast<std::uint32_t>(step),
                     static_cast<std::uint32_t>(step >> 32),
                     static_cast<std::uint32_t>(stream) | (static_cast<std::uint32_t>(particle >> 32) << 8)},
                    key_from_seed(seed));
}

}  // namespace abflab::rng
