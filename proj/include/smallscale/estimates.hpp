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

// Deterministic estimates: trap sets, the constants behind the nonlinearity
// bound, the cutoff K0, the rho bound, the Ito energy balance and the two
// tail bounds. log is the natural logarithm throughout.

#include "smallscale/dynamics.hpp"
#include "smallscale/forcing.hpp"
#include "smallscale/lattice.hpp"

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace smallscale {

namespace detail {

/// counts[n] = number of nonzero lattice points with |l|^2 = n, for n <= n_max.
inline std::vector<std::uint32_t> norm_counts(std::int64_t n_max)
{
  std::vector<std::uint32_t> counts(static_cast<std::size_t>(n_max + 1), 0);
  auto const r = static_cast<std::int64_t>(std::floor(std::sqrt(static_cast<double>(n_max))));
  for (std::int64_t a = -r; a <= r; ++a)
  {
    for (std::int64_t b = -r; b <= r; ++b)
    {
      auto const n = a * a + b * b;
      if (n > 0 && n <= n_max)
      {
        ++counts[static_cast<std::size_t>(n)];
      }
    }
  }
  return counts;
}

inline constexpr double kHalfDiagonal = 0.70710678118654752440;  // sqrt(2) / 2

}  // namespace detail

/// Value of a lattice constant with the data needed to judge it.
struct ConstantReport
{
  double value{0.0};
  double argmax_norm{0.0};         // |k| where the maximum is attained
  bool   at_probe_boundary{false};  // maximum sits on the largest |k| examined
  double remainder_estimate{0.0};  // integral estimate of the truncated tail
  double remainder_bound{0.0};     // certified upper bound on that tail
};

/**
 * sum_{0 < |l| <= |k|/2} |l|^-2, the inner sum of the first piece of the
 * nonlinearity majorant. Depends on k only through |k|.
 */
inline double inner_inverse_square_sum(double k_norm)
{
  auto const n_max = static_cast<std::int64_t>(std::floor(k_norm * k_norm / 4.0 + 1e-9));
  if (n_max < 1)
  {
    return 0.0;
  }
  auto const counts = detail::norm_counts(n_max);
  double     sum    = 0.0;
  for (std::int64_t n = n_max; n >= 1; --n)
  {
    sum += counts[static_cast<std::size_t>(n)] / static_cast<double>(n);
  }
  return sum;
}

/**
 * M = max over lattice 2 <= |k| <= probe of
 *     sqrt(sum_{|l| <= |k|/2} |l|^-2) / sqrt(log |k|).
 */
inline ConstantReport constants_M(int probe)
{
  if (probe < 4)
  {
    throw std::invalid_argument("constants_M: probe radius must be >= 4");
  }
  auto const m_max  = static_cast<std::int64_t>(probe) * probe;
  auto const counts = detail::norm_counts(m_max);
  // prefix[n] = sum over 0 < |l|^2 <= n of |l|^-2
  std::vector<double> prefix(static_cast<std::size_t>(m_max / 4 + 1), 0.0);
  for (std::size_t n = 1; n < prefix.size(); ++n)
  {
    prefix[n] = prefix[n - 1] + counts[n] / static_cast<double>(n);
  }
  ConstantReport out;
  std::int64_t   largest = 0;
  for (std::int64_t m = 4; m <= m_max; ++m)
  {
    if (counts[static_cast<std::size_t>(m)] == 0)
    {
      continue;
    }
    largest        = m;
    double const r = std::sqrt(static_cast<double>(m));
    double const v = std::sqrt(prefix[static_cast<std::size_t>(m / 4)] / std::log(r));
    if (v > out.value)
    {
      out.value       = v;
      out.argmax_norm = r;
    }
  }
  out.at_probe_boundary = out.argmax_norm == std::sqrt(static_cast<double>(largest));
  return out;
}

/// Tail sum_{|l| > R} |l|^-p split into an enumerated part and a remainder.
struct LatticeTail
{
  double enumerated{0.0};          // R < |l| <= R_cut
  double remainder_estimate{0.0};  // 2 pi R_cut^(2-p) / (p-2)
  double remainder_bound{0.0};     // certified upper bound beyond R_cut

  double estimate() const
  {
    return enumerated + remainder_estimate;
  }
  double upper() const
  {
    return enumerated + remainder_bound;
  }
};

/**
 * Upper bound on sum_{|l| > R} |l|^-p by comparing each lattice point with
 * its unit cell: (1 + c/R)^p 2 pi (R - c)^(2-p) / (p - 2), c = sqrt(2)/2.
 */
inline double power_tail_bound(double p, double R)
{
  double const c = detail::kHalfDiagonal;
  return std::pow(1.0 + c / R, p) * 2.0 * std::numbers::pi * std::pow(R - c, 2.0 - p) / (p - 2.0);
}

inline LatticeTail lattice_power_tail(double p, double R, double R_cut)
{
  if (!(p > 2.0))
  {
    throw std::invalid_argument("lattice_power_tail: exponent must exceed 2");
  }
  if (!(R_cut > R) || R_cut < 1.0)
  {
    throw std::invalid_argument("lattice_power_tail: need R_cut > R and R_cut >= 1");
  }
  auto const n_cut = static_cast<std::int64_t>(std::floor(R_cut * R_cut + 1e-9));
  auto const n_lo  = static_cast<std::int64_t>(std::floor(R * R + 1e-9));
  auto const counts = detail::norm_counts(n_cut);
  LatticeTail out;
  for (std::int64_t n = n_cut; n > n_lo; --n)
  {
    if (auto const c = counts[static_cast<std::size_t>(n)])
    {
      out.enumerated += c * std::pow(static_cast<double>(n), -0.5 * p);
    }
  }
  out.remainder_estimate = 2.0 * std::numbers::pi * std::pow(R_cut, 2.0 - p) / (p - 2.0);
  out.remainder_bound    = power_tail_bound(p, R_cut);
  return out;
}

/**
 * Mbar(gamma) = max over lattice 1 <= |k| <= probe of
 *     |k|^gamma sqrt(sum_{|l| > 2|k|} |l|^-(2 gamma + 2)).
 * Uses the certified upper value of each tail, so the result is an upper
 * bound on the true constant.
 */
inline ConstantReport constants_Mbar(double gamma, int probe, double R_cut = 0.0)
{
  if (!(gamma > 0.0))
  {
    throw std::invalid_argument("constants_Mbar: gamma must be > 0");
  }
  if (probe < 1)
  {
    throw std::invalid_argument("constants_Mbar: probe radius must be >= 1");
  }
  if (R_cut <= 0.0)
  {
    R_cut = std::max(1024.0, 8.0 * probe);
  }
  if (R_cut <= 2.0 * probe)
  {
    throw std::invalid_argument("constants_Mbar: R_cut must exceed twice the probe radius");
  }
  double const p      = 2.0 * gamma + 2.0;
  auto const   n_cut  = static_cast<std::int64_t>(std::floor(R_cut * R_cut + 1e-9));
  auto const   counts = detail::norm_counts(n_cut);
  // suffix[n] = sum over n < |l|^2 <= n_cut, accumulated smallest terms first
  std::vector<double> suffix(static_cast<std::size_t>(n_cut + 1), 0.0);
  for (std::int64_t n = n_cut - 1; n >= 0; --n)
  {
    auto const next = static_cast<std::size_t>(n + 1);
    suffix[static_cast<std::size_t>(n)] =
        suffix[next] + counts[next] * std::pow(static_cast<double>(n + 1), -0.5 * p);
  }
  ConstantReport out;
  out.remainder_estimate = 2.0 * std::numbers::pi * std::pow(R_cut, 2.0 - p) / (p - 2.0);
  out.remainder_bound    = power_tail_bound(p, R_cut);
  auto const   m_max     = static_cast<std::int64_t>(probe) * probe;
  std::int64_t largest   = 0;
  for (std::int64_t m = 1; m <= m_max; ++m)
  {
    if (counts[static_cast<std::size_t>(m)] == 0)
    {
      continue;
    }
    largest        = m;
    double const r = std::sqrt(static_cast<double>(m));
    // |l| > 2|k|  <=>  |l|^2 > 4m
    double const tail = suffix[static_cast<std::size_t>(4 * m)] + out.remainder_bound;
    double const v    = std::pow(r, gamma) * std::sqrt(tail);
    if (v > out.value)
    {
      out.value       = v;
      out.argmax_norm = r;
    }
  }
  out.at_probe_boundary = out.argmax_norm == std::sqrt(static_cast<double>(largest));
  return out;
}

/// c2 = max over lattice 2 <= |k| <= probe of (6|k| + 1) / (|k| sqrt(log |k|)).
inline ConstantReport constant_c2(int probe)
{
  if (probe < 2)
  {
    throw std::invalid_argument("constant_c2: probe radius must be >= 2");
  }
  auto const     m_max  = static_cast<std::int64_t>(probe) * probe;
  auto const     counts = detail::norm_counts(m_max);
  ConstantReport out;
  std::int64_t   largest = 0;
  for (std::int64_t m = 4; m <= m_max; ++m)
  {
    if (counts[static_cast<std::size_t>(m)] == 0)
    {
      continue;
    }
    largest        = m;
    double const r = std::sqrt(static_cast<double>(m));
    double const v = (6.0 * r + 1.0) / (r * std::sqrt(std::log(r)));
    if (v > out.value)
    {
      out.value       = v;
      out.argmax_norm = r;
    }
  }
  out.at_probe_boundary = out.argmax_norm == std::sqrt(static_cast<double>(largest));
  return out;
}

/// The three pieces of C(gamma) = 2^gamma M + 2^(gamma+1) c2 + Mbar(gamma).
struct NonlinearityConstants
{
  double gamma{0.0};
  int    probe{0};
  double M{0.0};
  double c2{0.0};
  double Mbar{0.0};
  double C{0.0};
};

inline NonlinearityConstants constant_C_gamma(double gamma, int probe)
{
  if (!(gamma > 1.0))
  {
    throw std::invalid_argument("constant_C_gamma: gamma must be > 1");
  }
  NonlinearityConstants out;
  out.gamma = gamma;
  out.probe = probe;
  out.M     = constants_M(probe).value;
  out.c2    = constant_c2(probe).value;
  out.Mbar  = constants_Mbar(gamma, probe).value;
  out.C     = std::pow(2.0, gamma) * out.M + std::pow(2.0, gamma + 1.0) * out.c2 + out.Mbar;
  return out;
}

/**
 * The majorant G(w)_k = sum_{l1 + l2 = k} |w_l1| |w_l2| |k . l2_perp| / |l2|^2
 * and its split by |l2| into |l2| <= |k|/2, |k|/2 < |l2| <= 2|k| and
 * |l2| > 2|k|. `total` is accumulated in its own pass.
 */
struct MajorantSplit
{
  double sigma1{0.0};
  double sigma2{0.0};
  double sigma3{0.0};
  double total{0.0};
};

inline MajorantSplit majorant_split(ModeField const &w, WaveVector k)
{
  int const     N  = w.truncation();
  auto const    kk = k.norm_squared();
  MajorantSplit out;
  for (auto const l2 : lattice(N))
  {
    auto const l1 = k - l2;
    if (l1.is_zero() || !w.contains(l1))
    {
      continue;
    }
    double const term = std::abs(w[l1]) * std::abs(w[l2]) * std::abs(dot(k, perp(l2))) /
                        static_cast<double>(l2.norm_squared());
    out.total += term;
  }
  for (auto const l2 : lattice(N))
  {
    auto const l1 = k - l2;
    if (l1.is_zero() || !w.contains(l1))
    {
      continue;
    }
    double const term = std::abs(w[l1]) * std::abs(w[l2]) * std::abs(dot(k, perp(l2))) /
                        static_cast<double>(l2.norm_squared());
    auto const ll = l2.norm_squared();
    if (4 * ll <= kk)
    {
      out.sigma1 += term;
    }
    else if (ll <= 4 * kk)
    {
      out.sigma2 += term;
    }
    else
    {
      out.sigma3 += term;
    }
  }
  return out;
}

/**
 * Bounds on the three pieces for a field with |w_l| <= D / |l|^gamma and
 * ||w||^2 <= eta E:
 *   sigma1 <= 2^gamma D |k|^-gamma sqrt(eta E) M |k| sqrt(log|k|)
 *   sigma2 <= 2^(gamma+1) D |k|^-gamma sqrt(eta E) (6|k| + 1)
 *   sigma3 <= |k| sqrt(eta E) Mbar D |k|^-gamma
 * and `lemma` = C(gamma) sqrt(eta E) |k| sqrt(log|k|) D |k|^-gamma.
 */
struct MajorantBounds
{
  double sigma1{0.0};
  double sigma2{0.0};
  double sigma3{0.0};
  double lemma{0.0};
};

inline MajorantBounds majorant_bounds(NonlinearityConstants const &c, double D, double eta_E,
                                      WaveVector k)
{
  double const r = k.norm();
  if (r < 2.0)
  {
    throw std::invalid_argument("majorant_bounds: only defined for |k| >= 2");
  }
  double const s   = std::sqrt(eta_E);
  double const env = D / std::pow(r, c.gamma);
  double const rl  = r * std::sqrt(std::log(r));
  MajorantBounds out;
  out.sigma1 = std::pow(2.0, c.gamma) * env * s * c.M * rl;
  out.sigma2 = std::pow(2.0, c.gamma + 1.0) * env * s * (6.0 * r + 1.0);
  out.sigma3 = r * s * c.Mbar * env;
  out.lemma  = c.C * s * rl * env;
  return out;
}

/// Parameters of the trap sets A1(D, gamma) and A2(E, eta) and the cutoff exponent.
struct TrapParams
{
  double gamma{2.0};
  double D{1.0};
  double E{1.0};
  double eta{2.0};
  double alpha_prime{2.0};

  void validate(double alpha) const
  {
    std::vector<std::string> errors;
    if (!(gamma > 1.0))
    {
      errors.emplace_back("gamma > 1 required");
    }
    if (!(D > 0.0))
    {
      errors.emplace_back("D > 0 required");
    }
    if (!(E > 0.0))
    {
      errors.emplace_back("E > 0 required");
    }
    if (!(eta > 1.0))
    {
      errors.emplace_back("eta > 1 required");
    }
    if (!(alpha_prime > 1.0) || !(alpha_prime <= alpha))
    {
      errors.emplace_back("alpha' in (1, alpha] required");
    }
    if (!errors.empty())
    {
      std::string msg = "TrapParams:";
      for (auto const &e : errors)
      {
        msg += " " + e + ";";
      }
      throw std::invalid_argument(msg);
    }
  }
};

/**
 * Smallest integer K0 >= 1 with h(|k|) < 1/6 for every lattice |k| > K0, where
 * h(r) = C sqrt(eta E) r sqrt(log r) / (nu r^alpha'). h rises to its maximum
 * at r* = exp(1 / (2 (alpha' - 1))) and then decreases, so the last crossing
 * is found by bracketing beyond r* and the lattice is scanned below it.
 */
inline int compute_K0(double C, double sqrt_eta_E, double nu, double alpha_prime)
{
  if (!(alpha_prime > 1.0))
  {
    throw std::invalid_argument("compute_K0: alpha' must be > 1");
  }
  auto h = [&](double r) {
    return r <= 1.0 ? 0.0
                    : C * sqrt_eta_E * r * std::sqrt(std::log(r)) / (nu * std::pow(r, alpha_prime));
  };
  double const threshold = 1.0 / 6.0;
  double const r_star    = std::exp(1.0 / (2.0 * (alpha_prime - 1.0)));
  if (h(r_star) < threshold)
  {
    return 1;
  }
  double hi = 2.0 * r_star;
  while (h(hi) >= threshold)
  {
    hi *= 2.0;
  }
  auto const bracket = boost::math::tools::bisect(
      [&](double r) { return h(r) - threshold; }, r_star, hi,
      boost::math::tools::eps_tolerance<double>(50));
  double const r_last = bracket.second;
  // Largest lattice norm with h >= 1/6; every such norm is <= r_last.
  auto const n_max = static_cast<std::int64_t>(std::floor(r_last * r_last)) + 1;
  auto const counts = detail::norm_counts(n_max);
  double     worst  = 0.0;
  for (std::int64_t n = n_max; n >= 1; --n)
  {
    if (counts[static_cast<std::size_t>(n)] == 0)
    {
      continue;
    }
    double const r = std::sqrt(static_cast<double>(n));
    if (h(r) >= threshold)
    {
      worst = r;
      break;
    }
  }
  return std::max(1, static_cast<int>(std::ceil(worst - 1e-12)));
}

/// Everything derived from TrapParams for one run.
struct TrapConstants
{
  NonlinearityConstants nonlinear;
  int                   K0{1};
  double                D_prime{0.0};
  double                D_bar{0.0};
};

inline TrapConstants derive_trap_constants(TrapParams const &tp, SimParams const &params,
                                           int probe = 64)
{
  tp.validate(params.alpha);
  TrapConstants out;
  out.nonlinear    = constant_C_gamma(tp.gamma, probe);
  double const s   = std::sqrt(tp.eta * tp.E);
  out.K0           = compute_K0(out.nonlinear.C, s, params.nu, tp.alpha_prime);
  out.D_prime      = 2.0 * s * std::pow(static_cast<double>(out.K0), tp.gamma);
  out.D_bar        = 2.0 * std::max(tp.D, out.D_prime);
  return out;
}

/// Membership of a path in one trap set; violation data present iff outside.
struct TrapVerdict
{
  bool                      inside{true};
  std::optional<double>     first_violation_time;
  std::optional<WaveVector> violating_mode;
};

namespace detail {

inline WaveVector sup_gamma_argmax(ModeField const &f, double gamma)
{
  WaveVector best{1, 0};
  double     value = -1.0;
  for (std::size_t i = f.centre() + 1; i < f.size(); ++i)
  {
    auto const   k = f.wave_vector(i);
    double const v = std::pow(k.norm(), gamma) * std::abs(f.at_index(i));
    if (v > value)
    {
      value = v;
      best  = k;
    }
  }
  return best;
}

inline WaveVector l2_argmax(ModeField const &f)
{
  return sup_gamma_argmax(f, 0.0);
}

}  // namespace detail

/// |w(s)|_{inf,gamma} <= D at every saved slice.
inline TrapVerdict in_A1(PathRecord const &path, double D, double gamma)
{
  if (path.states.empty())
  {
    throw std::invalid_argument("in_A1: empty path");
  }
  for (std::size_t i = 0; i < path.states.size(); ++i)
  {
    if (norm_sup_gamma(path.states[i], gamma) > D)
    {
      return {false, path.times[i], detail::sup_gamma_argmax(path.states[i], gamma)};
    }
  }
  return {};
}

/// ||w(0)||^2 <= E and ||w(s)||^2 <= eta E at every saved slice.
inline TrapVerdict in_A2(PathRecord const &path, double E, double eta)
{
  if (path.states.empty())
  {
    throw std::invalid_argument("in_A2: empty path");
  }
  for (std::size_t i = 0; i < path.states.size(); ++i)
  {
    double const limit = i == 0 ? std::min(E, eta * E) : eta * E;
    double const n     = norm_l2(path.states[i]);
    if (n * n > limit)
    {
      return {false, path.times[i], detail::l2_argmax(path.states[i])};
    }
  }
  return {};
}

/**
 * Outcome of checking sup_s |rho_k(s)| <= 2 Dbar / |k|^(gamma + alpha - alpha')
 * for |k| > K0. When the hypotheses fail nothing is checked.
 */
struct RhoBoundReport
{
  bool        hypotheses_met{false};
  std::string refusal;
  int         K0{1};
  double      D_bar{0.0};
  std::size_t modes_checked{0};
  std::size_t violations{0};
  double      min_margin{std::numeric_limits<double>::infinity()};
  WaveVector  worst_mode{1, 0};
  double      worst_time{0.0};
  bool        omega_in_A1_3Dbar{false};

  bool holds() const
  {
    return hypotheses_met && violations == 0 && omega_in_A1_3Dbar;
  }
};

inline RhoBoundReport check_prop1(CoupledPath const &cp, TrapParams const &tp,
                                  TrapConstants const &tc, SimParams const &params)
{
  RhoBoundReport out;
  out.K0    = tc.K0;
  out.D_bar = tc.D_bar;
  auto const z_in     = in_A1(cp.z, tp.D, tp.gamma);
  auto const omega_in = in_A2(cp.omega, tp.E, tp.eta);
  if (!z_in.inside || !omega_in.inside)
  {
    out.refusal = "hypotheses unmet:";
    if (!z_in.inside)
    {
      out.refusal += " z leaves A1(D, gamma) at t=" + std::to_string(*z_in.first_violation_time) + ";";
    }
    if (!omega_in.inside)
    {
      out.refusal +=
          " omega leaves A2(E, eta) at t=" + std::to_string(*omega_in.first_violation_time) + ";";
    }
    return out;
  }
  out.hypotheses_met = true;
  double const shift = tp.gamma + params.alpha - tp.alpha_prime;
  ModeField const probe(params.N);
  for (std::size_t idx = probe.centre() + 1; idx < probe.size(); ++idx)
  {
    auto const k = probe.wave_vector(idx);
    if (!(k.norm() > tc.K0))
    {
      continue;
    }
    ++out.modes_checked;
    double const bound = 2.0 * tc.D_bar / std::pow(k.norm(), shift);
    bool         bad   = false;
    for (std::size_t i = 0; i < cp.rho.states.size(); ++i)
    {
      double const r = std::abs(cp.rho.states[i].at_index(idx));
      if (r == 0.0)
      {
        continue;
      }
      double const margin = bound / r;
      if (margin < out.min_margin)
      {
        out.min_margin = margin;
        out.worst_mode = k;
        out.worst_time = cp.rho.times[i];
      }
      bad = bad || r > bound;
    }
    out.violations += bad ? 1 : 0;
  }
  out.omega_in_A1_3Dbar = in_A1(cp.omega, 3.0 * tc.D_bar, tp.gamma).inside;
  return out;
}

/**
 * Discrete residual of the Ito enstrophy identity
 *
 *   ||w(t)||^2 = ||w(0)||^2 + E1 t + M_t - 2 nu int sum |k|^alpha |w_k|^2 ds,
 *   M_t = 2 sum_k int Re(sigma_k conj(w_k) dbeta_k).
 *
 * Stochastic integrals use the left endpoint; the dissipation integral uses
 * |w_k|^2 (1 - e^{-2 lambda dt}) per step, exact for pure decay. Two
 * residuals are reported: with the compensator E1 t, and with the realised
 * quadratic variation sum sigma_k^2 |dbeta_k|^2. The second is the pathwise
 * form and converges at rate dt; the first carries the O(sqrt(dt))
 * fluctuation of the realised variation about its mean.
 */
struct EnergyBalanceReport
{
  double              max_residual{0.0};           // with E1 t
  double              max_pathwise_residual{0.0};  // with realised variation
  std::vector<double> times;
  std::vector<double> residual;
  std::vector<double> pathwise_residual;
};

inline EnergyBalanceReport energy_balance(PathRecord const &path, SimParams const &params)
{
  if (path.noise.empty())
  {
    throw std::invalid_argument("energy_balance: path has no stored noise");
  }
  if (path.states.size() != path.noise.size() + 1)
  {
    throw std::invalid_argument("energy_balance: every step must be saved (save_every = 1)");
  }
  double const E1 = energy_input_rate(params.forcing, params.N);
  ModeField const probe(params.N);
  auto const      n = probe.size();
  std::vector<double> sigma(n, 0.0), damp(n, 0.0);
  for (std::size_t i = probe.centre() + 1; i < n; ++i)
  {
    auto const k = probe.wave_vector(i);
    sigma[i]     = params.forcing.sigma(k);
    damp[i]      = -std::expm1(-2.0 * params.dissipation(k) * params.dt);
  }
  EnergyBalanceReport out;
  double const e0          = std::pow(norm_l2(path.states.front()), 2);
  double       martingale  = 0.0;
  double       dissipation = 0.0;
  double       variation   = 0.0;
  out.times.push_back(path.times.front());
  out.residual.push_back(0.0);
  out.pathwise_residual.push_back(0.0);
  for (std::size_t s = 0; s < path.noise.size(); ++s)
  {
    auto const w  = path.states[s].data();
    auto const db = path.noise[s].increments.data();
    // Sums over the upper half, doubled for the mirror modes.
    for (std::size_t i = probe.centre() + 1; i < n; ++i)
    {
      martingale += 4.0 * sigma[i] * (std::conj(w[i]) * db[i]).real();
      dissipation += 2.0 * std::norm(w[i]) * damp[i];
      variation += 2.0 * sigma[i] * sigma[i] * std::norm(db[i]);
    }
    double const t   = path.times[s + 1];
    double const et  = std::pow(norm_l2(path.states[s + 1]), 2);
    double const r1  = et - e0 - E1 * t - martingale + dissipation;
    double const r2  = et - e0 - variation - martingale + dissipation;
    out.times.push_back(t);
    out.residual.push_back(r1);
    out.pathwise_residual.push_back(r2);
    out.max_residual          = std::max(out.max_residual, std::abs(r1));
    out.max_pathwise_residual = std::max(out.max_pathwise_residual, std::abs(r2));
  }
  return out;
}

/**
 * P(w leaves A2(E, eta) on [0, t]) <= exp(-(nu / sigma_max^2) [(eta - 1) E - E1 t]).
 * Throws when (eta - 1) E < E1 t; equality gives the vacuous value 1.
 */
inline double martingale_tail_bound(double E, double eta, double t, SimParams const &params)
{
  double const E1     = energy_input_rate(params.forcing, params.N);
  double const smax   = sigma_max(params.forcing, params.N);
  double const excess = (eta - 1.0) * E - E1 * t;
  double const scale  = std::max({std::abs((eta - 1.0) * E), std::abs(E1 * t), 1e-300});
  if (excess < -1e-12 * scale)
  {
    throw std::invalid_argument(
        "martingale_tail_bound: eta too small for the bound to be meaningful ((eta-1)E < E1 t)");
  }
  if (smax == 0.0)
  {
    return 0.0;
  }
  return std::clamp(std::exp(-params.nu / (smax * smax) * std::max(excess, 0.0)), 0.0, 1.0);
}

/**
 * Gaussian tail bound for one stationary OU mode:
 *   P(|z_k| > D/|k|^gamma) <= (2 |k|^(l + alpha/2 + gamma) / (D sqrt(pi)))
 *                              exp(-(D^2/2) |k|^(l + alpha/2 - gamma)),
 * clipped to [0, 1]. Requires l + alpha/2 > gamma.
 */
inline double gaussian_tail_bound(double D, double gamma, WaveVector k, SimParams const &params)
{
  double const l = params.forcing.decay;
  double const q = l + 0.5 * params.alpha - gamma;
  if (!(q > 0.0))
  {
    throw std::invalid_argument("gaussian_tail_bound: l + alpha/2 > gamma required");
  }
  if (!(D > 0.0))
  {
    throw std::invalid_argument("gaussian_tail_bound: D must be > 0");
  }
  double const r      = k.norm();
  double const prefix = 2.0 * std::pow(r, l + 0.5 * params.alpha + gamma) / (D * std::sqrt(std::numbers::pi));
  return std::clamp(prefix * std::exp(-0.5 * D * D * std::pow(r, q)), 0.0, 1.0);
}

/// Exact stationary tail P(|z_k| > x) = exp(-x^2 / E|z_k|^2) for comparison.
inline double stationary_tail(double D, double gamma, WaveVector k, SimParams const &params)
{
  double const var = std::pow(params.forcing.sigma(k), 2) / (2.0 * params.dissipation(k));
  double const x   = D / std::pow(k.norm(), gamma);
  return std::exp(-x * x / var);
}

/**
 * sum over Z^2_* of exp(-(D^2/2) |k|^q): enumeration to R_cut plus a
 * certified remainder. For a decreasing profile f, each lattice point is
 * dominated by its unit cell, so the tail beyond R is at most
 * 2 pi int_{R - 2c}^inf (u + c) f(u) du with c = sqrt(2)/2.
 */
struct LatticeExpSum
{
  double enumerated{0.0};
  double remainder_bound{0.0};

  double upper() const
  {
    return enumerated + remainder_bound;
  }
};

inline LatticeExpSum lattice_exponential_sum(double D, double q, double R_cut = 64.0)
{
  if (!(q > 0.0) || !(D > 0.0))
  {
    throw std::invalid_argument("lattice_exponential_sum: D > 0 and q > 0 required");
  }
  double const a     = 0.5 * D * D;
  auto const   n_cut = static_cast<std::int64_t>(std::floor(R_cut * R_cut + 1e-9));
  auto const   counts = detail::norm_counts(n_cut);
  LatticeExpSum out;
  for (std::int64_t n = n_cut; n >= 1; --n)
  {
    if (auto const c = counts[static_cast<std::size_t>(n)])
    {
      out.enumerated += c * std::exp(-a * std::pow(static_cast<double>(n), 0.5 * q));
    }
  }
  double const c  = detail::kHalfDiagonal;
  double const lo = std::max(R_cut - 2.0 * c, 0.0);
  boost::math::quadrature::exp_sinh<double> integrator;
  out.remainder_bound = 2.0 * std::numbers::pi * integrator.integrate([&](double v) {
    double const u = lo + v;
    return (u + c) * std::exp(-a * std::pow(u, q));
  });
  return out;
}

/// Classification of the 2D lattice sum of |k|^-p log|k|.
enum class SeriesMode
{
  pathspace,
  auxiliary
};

struct NovikovSeries
{
  double              exponent{0.0};       // p in |k|^-p log|k|
  bool                converging{false};   // p > 2
  bool                trend_converging{false};
  double              increment_ratio{0.0};  // (S(R) - S(R/2)) / (S(R/2) - S(R/4))
  std::vector<double> radii;
  std::vector<double> partial_sums;

  bool consistent() const
  {
    return converging == trend_converging;
  }
};

/**
 * Partial sums over |k| <= r, r = 2..R, of the mode series bounding the
 * Novikov integrand:
 *   pathspace: |k|^(2l) |k|^2 log|k| / |k|^(alpha + 2l - 2 eps)  (p = alpha - 2 - 2 eps)
 *   auxiliary: |k|^(2l) |k|^2 log|k| / |k|^(2 gamma + alpha)     (p = 2 gamma + alpha - 2l - 2)
 * The numeric trend compares the increments over the last two doublings.
 */
inline NovikovSeries novikov_partial_sums(double alpha, double l, double gamma_or_eps,
                                          SeriesMode mode, int R)
{
  if (R < 4)
  {
    throw std::invalid_argument("novikov_partial_sums: R >= 4 required");
  }
  NovikovSeries out;
  out.exponent = mode == SeriesMode::pathspace ? alpha - 2.0 - 2.0 * gamma_or_eps
                                               : 2.0 * gamma_or_eps + alpha - 2.0 * l - 2.0;
  out.converging = out.exponent > 2.0;
  auto const n_max  = static_cast<std::int64_t>(R) * R;
  auto const counts = detail::norm_counts(n_max);
  std::vector<double> cumulative(static_cast<std::size_t>(n_max + 1), 0.0);
  for (std::int64_t n = 1; n <= n_max; ++n)
  {
    double const r = std::sqrt(static_cast<double>(n));
    cumulative[static_cast<std::size_t>(n)] =
        cumulative[static_cast<std::size_t>(n - 1)] +
        counts[static_cast<std::size_t>(n)] * std::pow(r, -out.exponent) * std::log(r);
  }
  for (int r = 2; r <= R; ++r)
  {
    out.radii.push_back(r);
    out.partial_sums.push_back(cumulative[static_cast<std::size_t>(r) * r]);
  }
  auto at = [&](int r) { return cumulative[static_cast<std::size_t>(r) * r]; };
  double const inc_last = at(R) - at(R / 2);
  double const inc_prev = at(R / 2) - at(R / 4);
  out.increment_ratio  = inc_prev > 0.0 ? inc_last / inc_prev : 0.0;
  out.trend_converging = out.increment_ratio < 1.0;
  return out;
}

}  // namespace smallscale
