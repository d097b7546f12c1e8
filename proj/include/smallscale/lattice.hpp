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

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace smallscale {

using complex = std::complex<double>;

/**
 * Integer wave vector k in Z^2 \ {0}.
 */
struct WaveVector
{
  int k1{0};
  int k2{0};

  constexpr int norm_squared() const noexcept
  {
    return k1 * k1 + k2 * k2;
  }

  double norm() const noexcept
  {
    return std::sqrt(static_cast<double>(norm_squared()));
  }

  constexpr bool is_zero() const noexcept
  {
    return k1 == 0 && k2 == 0;
  }

  constexpr WaveVector operator-() const noexcept
  {
    return {-k1, -k2};
  }

  friend constexpr WaveVector operator+(WaveVector a, WaveVector b) noexcept
  {
    return {a.k1 + b.k1, a.k2 + b.k2};
  }

  friend constexpr WaveVector operator-(WaveVector a, WaveVector b) noexcept
  {
    return {a.k1 - b.k1, a.k2 - b.k2};
  }

  friend constexpr bool operator==(WaveVector a, WaveVector b) noexcept = default;
};

constexpr int dot(WaveVector a, WaveVector b) noexcept
{
  return a.k1 * b.k1 + a.k2 * b.k2;
}

/// Counterclockwise rotation by 90 degrees: (k1, k2) -> (-k2, k1).
constexpr WaveVector perp(WaveVector k) noexcept
{
  return {-k.k2, k.k1};
}

/// max(|k1|, |k2|), the norm defining the square truncation.
constexpr int sup_index(WaveVector k) noexcept
{
  return std::max(k.k1 < 0 ? -k.k1 : k.k1, k.k2 < 0 ? -k.k2 : k.k2);
}

/**
 * All k with max(|k1|,|k2|) <= N, k != 0, row-major with k1 outer.
 */
inline std::vector<WaveVector> lattice(int N)
{
  if (N < 1)
  {
    throw std::invalid_argument("lattice: truncation must be >= 1, got " + std::to_string(N));
  }
  std::vector<WaveVector> out;
  out.reserve(static_cast<std::size_t>((2 * N + 1) * (2 * N + 1) - 1));
  for (int k1 = -N; k1 <= N; ++k1)
  {
    for (int k2 = -N; k2 <= N; ++k2)
    {
      if (k1 != 0 || k2 != 0)
      {
        out.push_back({k1, k2});
      }
    }
  }
  return out;
}

/**
 * Conjugate-symmetric table of complex amplitudes over the square
 * truncation K_N.
 *
 * Storage is dense over the (2N+1)^2 grid, row-major in (k1, k2). The slot
 * of the zero mode exists but is pinned to zero. Because of the row-major
 * layout the site -k lives at index size()-1-index(k), and the "upper half"
 * (k1 > 0, or k1 == 0 and k2 > 0) is exactly the index range above the
 * centre.
 *
 * Every write goes through set(), which stores the conjugate at -k, so
 * amplitude(-k) == conj(amplitude(k)) holds bit for bit.
 */
class ModeField
{
public:
  ModeField() = default;

  explicit ModeField(int N)
    : N_(N)
    , side_(2 * N + 1)
  {
    if (N < 1)
    {
      throw std::invalid_argument("ModeField: truncation must be >= 1, got " + std::to_string(N));
    }
    data_.assign(static_cast<std::size_t>(side_ * side_), complex{0.0, 0.0});
  }

  /// Builds a field from a generator evaluated on the upper half lattice.
  template <typename Generator>
  static ModeField from_half(int N, Generator &&gen)
  {
    ModeField f(N);
    for (std::size_t i = f.centre() + 1; i < f.data_.size(); ++i)
    {
      f.set_index(i, gen(f.wave_vector(i)));
    }
    return f;
  }

  int truncation() const noexcept
  {
    return N_;
  }

  /// Number of grid slots, including the pinned zero mode.
  std::size_t size() const noexcept
  {
    return data_.size();
  }

  /// Number of stored modes, (2N+1)^2 - 1.
  std::size_t mode_count() const noexcept
  {
    return data_.empty() ? 0 : data_.size() - 1;
  }

  std::size_t centre() const noexcept
  {
    return data_.size() / 2;
  }

  bool contains(WaveVector k) const noexcept
  {
    return !k.is_zero() && sup_index(k) <= N_;
  }

  std::size_t index(WaveVector k) const
  {
    if (!contains(k))
    {
      throw std::out_of_range("ModeField: wave vector (" + std::to_string(k.k1) + "," +
                              std::to_string(k.k2) + ") outside truncation " +
                              std::to_string(N_));
    }
    return static_cast<std::size_t>((k.k1 + N_) * side_ + (k.k2 + N_));
  }

  WaveVector wave_vector(std::size_t i) const noexcept
  {
    auto const s = static_cast<int>(i);
    return {s / side_ - N_, s % side_ - N_};
  }

  complex operator[](WaveVector k) const
  {
    return data_[index(k)];
  }

  complex at_index(std::size_t i) const noexcept
  {
    return data_[i];
  }

  /// Writes amplitude(k) = v and amplitude(-k) = conj(v).
  void set(WaveVector k, complex v)
  {
    set_index(index(k), v);
  }

  void set_index(std::size_t i, complex v)
  {
    if (i == centre())
    {
      throw std::invalid_argument("ModeField: the zero mode is excluded");
    }
    data_[i]                   = v;
    data_[data_.size() - 1 - i] = std::conj(v);
  }

  std::span<complex const> data() const noexcept
  {
    return data_;
  }

  bool is_conjugate_symmetric() const noexcept
  {
    auto const n = data_.size();
    if (data_[centre()] != complex{0.0, 0.0})
    {
      return false;
    }
    for (std::size_t i = centre() + 1; i < n; ++i)
    {
      auto const c = std::conj(data_[i]);
      if (data_[n - 1 - i].real() != c.real() || data_[n - 1 - i].imag() != c.imag())
      {
        return false;
      }
    }
    return true;
  }

  ModeField &operator+=(ModeField const &other)
  {
    check_same_truncation(other);
    for (std::size_t i = 0; i < data_.size(); ++i)
    {
      data_[i] += other.data_[i];
    }
    return *this;
  }

  ModeField &operator-=(ModeField const &other)
  {
    check_same_truncation(other);
    for (std::size_t i = 0; i < data_.size(); ++i)
    {
      data_[i] -= other.data_[i];
    }
    return *this;
  }

  ModeField &operator*=(double s) noexcept
  {
    for (auto &v : data_)
    {
      v *= s;
    }
    return *this;
  }

  friend ModeField operator+(ModeField a, ModeField const &b)
  {
    a += b;
    return a;
  }

  friend ModeField operator-(ModeField a, ModeField const &b)
  {
    a -= b;
    return a;
  }

  friend ModeField operator*(double s, ModeField a) noexcept
  {
    a *= s;
    return a;
  }

  friend bool operator==(ModeField const &a, ModeField const &b) noexcept
  {
    return a.N_ == b.N_ && a.data_ == b.data_;
  }

private:
  void check_same_truncation(ModeField const &other) const
  {
    if (other.N_ != N_)
    {
      throw std::invalid_argument("ModeField: truncation mismatch (" + std::to_string(N_) +
                                  " vs " + std::to_string(other.N_) + ")");
    }
  }

  int                  N_{0};
  int                  side_{0};
  std::vector<complex> data_;
};

/// Values of the two norms used by the trap sets.
struct FieldNorms
{
  double sup_gamma{0.0};
  double l2{0.0};
};

/// sup_k |k|^gamma |f_k| over the stored modes.
inline double norm_sup_gamma(ModeField const &f, double gamma)
{
  if (gamma < 0.0)
  {
    throw std::invalid_argument("norm_sup_gamma: gamma must be >= 0");
  }
  double best = 0.0;
  // |f_{-k}| == |f_k|, so the upper half suffices.
  for (std::size_t i = f.centre() + 1; i < f.size(); ++i)
  {
    auto const k = f.wave_vector(i);
    best = std::max(best, std::pow(k.norm(), gamma) * std::abs(f.at_index(i)));
  }
  return best;
}

/// (sum_k |f_k|^2)^(1/2), both members of each +-k pair counted.
inline double norm_l2(ModeField const &f)
{
  double sum = 0.0;
  for (auto const &v : f.data())
  {
    sum += std::norm(v);
  }
  return std::sqrt(sum);
}

inline FieldNorms norms(ModeField const &f, double gamma)
{
  return {norm_sup_gamma(f, gamma), norm_l2(f)};
}

/// Velocity components recovered from vorticity, u_k = i k_perp w_k / |k|^2.
struct VelocityField
{
  ModeField u1;
  ModeField u2;
};

inline VelocityField velocity_from_vorticity(ModeField const &omega)
{
  auto const N = omega.truncation();
  auto const make = [&](bool first) {
    return ModeField::from_half(N, [&](WaveVector k) {
      auto const kp = perp(k);
      auto const c  = static_cast<double>(first ? kp.k1 : kp.k2) / k.norm_squared();
      return complex{0.0, c} * omega[k];
    });
  };
  return {make(true), make(false)};
}

}  // namespace smallscale
