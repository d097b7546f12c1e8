#pragma once
//------------------------------------------------------------------------------
//
//   Copyright 2026 The smallscale Authors
//
//   Licensed under the Apache License, Version 2.0 (the "License");
//   you may not use this file except in compliance with the License.
//   You may obtain a copy of the License at
//
//       http://www.apache.org/licenses/LICENSE-2.0
//
//   Unless required by applicable law or agreed to in writing, software
//   distributed under the License is distributed on an "AS IS" BASIS,
//   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
//   See the License for the specific language governing permissions and
//   limitations under the License.
//
//------------------------------------------------------------------------------

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace smallscale {

/**
 * Philox4x32-10 counter-based generator (Salmon et al., "Parallel random
 * numbers: as easy as 1, 2, 3", SC'11).
 *
 * A draw is a pure function of (key, counter); there is no hidden state, so
 * any stream can be addressed directly and ensembles need no coordination.
 */
class Philox4x32
{
public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key     = std::array<std::uint32_t, 2>;

  static constexpr Counter block(Counter ctr, Key key) noexcept
  {
    for (int round = 0; round < 10; ++round)
    {
      ctr = single_round(ctr, key);
      key[0] += kWeyl0;
      key[1] += kWeyl1;
    }
    return ctr;
  }

private:
  static constexpr std::uint32_t kMul0  = 0xD2511F53u;
  static constexpr std::uint32_t kMul1  = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

  static constexpr Counter single_round(Counter c, Key k) noexcept
  {
    std::uint64_t const p0 = std::uint64_t{kMul0} * c[0];
    std::uint64_t const p1 = std::uint64_t{kMul1} * c[2];
    auto const hi0 = static_cast<std::uint32_t>(p0 >> 32);
    auto const lo0 = static_cast<std::uint32_t>(p0);
    auto const hi1 = static_cast<std::uint32_t>(p1 >> 32);
    auto const lo1 = static_cast<std::uint32_t>(p1);
    return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
  }
};

/// SplitMix64 finaliser; used to derive keys from seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept
{
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/**
 * Key of trajectory `index` under `master_seed`:
 * splitmix64(splitmix64(master_seed) ^ splitmix64(index + 1)).
 */
constexpr std::uint64_t trajectory_seed(std::uint64_t master_seed, std::uint64_t index) noexcept
{
  return splitmix64(splitmix64(master_seed) ^ splitmix64(index + 1));
}

struct NormalPair
{
  double first{0.0};
  double second{0.0};
};

/**
 * Two independent standard normals addressed by (key, counter), via
 * Box-Muller on two 53-bit uniforms taken from one Philox block.
 */
inline NormalPair normal_pair(std::uint64_t key, std::uint32_t c0, std::uint32_t c1,
                              std::uint32_t c2 = 0, std::uint32_t c3 = 0) noexcept
{
  auto const out = Philox4x32::block(
      {c0, c1, c2, c3},
      {static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32)});
  auto const w0 = (std::uint64_t{out[0]} << 32) | out[1];
  auto const w1 = (std::uint64_t{out[2]} << 32) | out[3];
  constexpr double scale = 1.0 / 9007199254740992.0;  // 2^-53
  // u1 in (0, 1] keeps the logarithm finite.
  double const u1     = (static_cast<double>(w0 >> 11) + 1.0) * scale;
  double const u2     = static_cast<double>(w1 >> 11) * scale;
  double const radius = std::sqrt(-2.0 * std::log(u1));
  double const angle  = 2.0 * std::numbers::pi * u2;
  return {radius * std::cos(angle), radius * std::sin(angle)};
}

/// Uniform double in [0, 1) addressed by (key, counter).
inline double uniform01(std::uint64_t key, std::uint32_t c0, std::uint32_t c1,
                        std::uint32_t c2 = 0, std::uint32_t c3 = 0) noexcept
{
  auto const out = Philox4x32::block(
      {c0, c1, c2, c3},
      {static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32)});
  auto const w0 = (std::uint64_t{out[0]} << 32) | out[1];
  return static_cast<double>(w0 >> 11) * (1.0 / 9007199254740992.0);
}

/**
 * Sequential view over one counter-addressed stream, for code that just
 * wants "the next normal". Independent substreams differ in `tag`.
 */
class NormalStream
{
public:
  NormalStream(std::uint64_t key, std::uint32_t tag) noexcept
    : key_(key)
    , tag_(tag)
  {}

  double operator()() noexcept
  {
    if (has_spare_)
    {
      has_spare_ = false;
      return spare_;
    }
    auto const p = normal_pair(key_, static_cast<std::uint32_t>(counter_),
                               static_cast<std::uint32_t>(counter_ >> 32), tag_, 0xA5A5A5A5u);
    ++counter_;
    spare_     = p.second;
    has_spare_ = true;
    return p.first;
  }

private:
  std::uint64_t key_;
  std::uint32_t tag_;
  std::uint64_t counter_{0};
  double        spare_{0.0};
  bool          has_spare_{false};
};

}  // namespace smallscale
