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

#include "smallscale/lattice.hpp"
#include "smallscale/random.hpp"

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace smallscale {

/**
 * Real positive forcing spectrum sigma_k = K2 / |k|^l.
 *
 * The lower and upper envelope constants coincide (K1 = K2). amplitude = 0 is
 * accepted so that tests can switch the noise off.
 */
struct ForcingSpectrum
{
  double amplitude{1.0};  // K2
  double decay{1.0};      // l

  double sigma(WaveVector k) const
  {
    if (k.is_zero())
    {
      throw std::invalid_argument("sigma: the zero mode is not forced");
    }
    return amplitude * std::pow(k.norm(), -decay);
  }
};

/// Truncated energy input rate, sum over K_N of sigma_k^2.
inline double energy_input_rate(ForcingSpectrum const &spec, int N)
{
  double sum = 0.0;
  for (auto const k : lattice(N))
  {
    auto const s = spec.sigma(k);
    sum += s * s;
  }
  return sum;
}

/// max_k sigma_k, attained at |k| = 1 for l >= 0.
inline double sigma_max(ForcingSpectrum const &spec, int N)
{
  if (N < 1)
  {
    throw std::invalid_argument("sigma_max: truncation must be >= 1");
  }
  return spec.decay >= 0.0 ? spec.amplitude : spec.sigma({N, N});
}

/// Brownian increments over one step, conjugate symmetric.
struct NoiseIncrementSet
{
  double    dt{0.0};
  ModeField increments;
};

/// Stable 32-bit code for a wave vector; keeps noise matched across truncations.
constexpr std::uint32_t mode_code(WaveVector k) noexcept
{
  return (static_cast<std::uint32_t>(k.k1 + 32768) << 16) |
         static_cast<std::uint32_t>(k.k2 + 32768);
}

/**
 * Complex Brownian increments for one trajectory.
 *
 * The increment of mode k at step n is a pure function of
 * (trajectory key, n, k): each upper-half mode has its own substream, and
 * the same k draws the same numbers regardless of the truncation. Real and
 * imaginary parts are independent N(0, dt/2), so E|dbeta_k|^2 = dt.
 */
class NoiseStream
{
public:
  NoiseStream(std::uint64_t master_seed, std::uint64_t trajectory, int N)
    : key_(trajectory_seed(master_seed, trajectory))
    , N_(N)
  {
    if (N < 1)
    {
      throw std::invalid_argument("NoiseStream: truncation must be >= 1");
    }
  }

  std::uint64_t key() const noexcept
  {
    return key_;
  }

  int truncation() const noexcept
  {
    return N_;
  }

  std::uint64_t position() const noexcept
  {
    return step_;
  }

  NoiseIncrementSet at(std::uint64_t step, double dt) const
  {
    if (!(dt > 0.0))
    {
      throw std::invalid_argument("sample_increments: dt must be > 0");
    }
    double const scale = std::sqrt(0.5 * dt);
    auto const   lo    = static_cast<std::uint32_t>(step);
    auto const   hi    = static_cast<std::uint32_t>(step >> 32);
    return {dt, ModeField::from_half(N_, [&](WaveVector k) {
              auto const g = normal_pair(key_, lo, hi, mode_code(k));
              return complex{scale * g.first, scale * g.second};
            })};
  }

  NoiseIncrementSet next(double dt)
  {
    auto out = at(step_, dt);
    ++step_;
    return out;
  }

private:
  std::uint64_t key_;
  int           N_;
  std::uint64_t step_{0};
};

inline NoiseIncrementSet sample_increments(double dt, NoiseStream &stream)
{
  return stream.next(dt);
}

/// `steps` consecutive increments of size dt from the stream.
inline std::vector<NoiseIncrementSet> sample_noise_path(NoiseStream &stream, double dt,
                                                        std::size_t steps)
{
  std::vector<NoiseIncrementSet> out;
  out.reserve(steps);
  for (std::size_t i = 0; i < steps; ++i)
  {
    out.push_back(stream.next(dt));
  }
  return out;
}

/**
 * Sums groups of `factor` consecutive increments, giving the same Brownian
 * path sampled on a grid `factor` times coarser.
 */
inline std::vector<NoiseIncrementSet> coarsen(std::span<NoiseIncrementSet const> fine,
                                              std::size_t                        factor)
{
  if (factor == 0 || fine.size() % factor != 0)
  {
    throw std::invalid_argument("coarsen: factor must divide the number of increments");
  }
  std::vector<NoiseIncrementSet> out;
  out.reserve(fine.size() / factor);
  for (std::size_t i = 0; i < fine.size(); i += factor)
  {
    NoiseIncrementSet acc = fine[i];
    for (std::size_t j = 1; j < factor; ++j)
    {
      acc.dt += fine[i + j].dt;
      acc.increments += fine[i + j].increments;
    }
    out.push_back(std::move(acc));
  }
  return out;
}

}  // namespace smallscale
