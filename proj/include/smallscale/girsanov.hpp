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

// Change of measure between the coupled processes.
//
// For a drift difference D and noise sigma_k dbeta_k the log density of the
// shifted law against the base law, along a base path, is
//
//   log_rn = sum_k int Re(conj(D_k) dbeta_k) / sigma_k
//          - 1/2 int sum_k |D_k|^2 / sigma_k^2 ds,
//
// with k over the whole lattice (both members of each conjugate pair). The
// stochastic integral uses the left end of each step. The quadratic term
// uses the left end too by default: then each step contributes
// X - Var(X)/2 with X Gaussian given the past, so exp(log_rn) has mean one
// exactly at every step size. The trapezoid rule is available; it drifts
// from that identity by O(dt) times the stiffest resolved rate.

#include "smallscale/dynamics.hpp"
#include "smallscale/forcing.hpp"
#include "smallscale/lattice.hpp"
#include "smallscale/random.hpp"

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace smallscale {

/// Which drift difference to integrate.
enum class DriftDifference
{
  pathspace,  // F(x(s)) along the path: SNS against OU
  auxiliary   // Ftilde(s) built from the SNS path: auxiliary process against OU
};

enum class Quadrature
{
  trapezoid,
  left_endpoint
};

struct GirsanovRecord
{
  double stochastic_integral{0.0};
  double quadratic_term{0.0};
  double log_rn{0.0};
};

/**
 * Per-step ingredients of the density along one path:
 * integrand[i] = sum_k |D_k(t_i)|^2 / sigma_k^2 for i = 0..M and
 * stochastic[i] = sum_k Re(conj(D_k(t_i)) dbeta_k^i) / sigma_k for i = 0..M-1.
 * Stopping at grid index j zeroes D from t_j on.
 */
struct GirsanovSeries
{
  double              dt{0.0};
  std::vector<double> times;
  std::vector<double> integrand;
  std::vector<double> stochastic;

  std::size_t steps() const noexcept
  {
    return stochastic.size();
  }

  /// Grid index from which the drift is switched off: first t_i >= tau.
  std::size_t stop_index(std::optional<double> tau) const
  {
    if (!tau)
    {
      return times.size();
    }
    double const eps = 1e-9 * dt;
    auto const   it  = std::lower_bound(times.begin(), times.end(), *tau - eps);
    return static_cast<std::size_t>(it - times.begin());
  }

  /// int_0^t sum_k |D_k|^2 / sigma_k^2 ds with D zeroed from index `stop` on.
  double novikov(std::size_t stop, Quadrature q = Quadrature::left_endpoint) const
  {
    auto at = [&](std::size_t i) { return i < stop ? integrand[i] : 0.0; };
    double sum = 0.0;
    for (std::size_t i = 0; i < steps(); ++i)
    {
      sum += q == Quadrature::trapezoid ? 0.5 * (at(i) + at(i + 1)) : at(i);
    }
    return sum * dt;
  }

  GirsanovRecord record(std::size_t stop, Quadrature q = Quadrature::left_endpoint) const
  {
    GirsanovRecord out;
    for (std::size_t i = 0; i < std::min(stop, steps()); ++i)
    {
      out.stochastic_integral += stochastic[i];
    }
    out.quadratic_term = 0.5 * novikov(stop, q);
    out.log_rn         = out.stochastic_integral - out.quadratic_term;
    return out;
  }
};

namespace detail {

inline std::vector<double> inverse_sigma(ForcingSpectrum const &spec, int N)
{
  if (!(spec.amplitude > 0.0))
  {
    throw std::invalid_argument("change of measure needs every mode forced (amplitude > 0)");
  }
  ModeField const     probe(N);
  std::vector<double> out(probe.size(), 0.0);
  for (std::size_t i = 0; i < probe.size(); ++i)
  {
    if (i != probe.centre())
    {
      out[i] = 1.0 / spec.sigma(probe.wave_vector(i));
    }
  }
  return out;
}

}  // namespace detail

/**
 * Builds the series for an arbitrary drift: `drift_at(i)` returns D at
 * grid time t_i, i = 0..noise.size().
 */
template <class DriftAt>
GirsanovSeries girsanov_series(std::vector<NoiseIncrementSet> const &noise, DriftAt &&drift_at,
                               ForcingSpectrum const &spec, int N)
{
  if (noise.empty())
  {
    throw std::invalid_argument("girsanov_series: no stored noise");
  }
  auto const     inv = detail::inverse_sigma(spec, N);
  GirsanovSeries out;
  out.dt = noise.front().dt;
  auto const n = noise.size();
  out.times.reserve(n + 1);
  out.integrand.reserve(n + 1);
  out.stochastic.reserve(n);
  for (std::size_t i = 0; i <= n; ++i)
  {
    ModeField const d = drift_at(i);
    auto const      w = d.data();
    double          q = 0.0;
    double          s = 0.0;
    // Upper half doubled: the mirror terms are equal.
    for (std::size_t j = d.centre() + 1; j < d.size(); ++j)
    {
      q += 2.0 * std::norm(w[j]) * inv[j] * inv[j];
      if (i < n)
      {
        s += 2.0 * (std::conj(w[j]) * noise[i].increments.data()[j]).real() * inv[j];
      }
    }
    out.times.push_back(static_cast<double>(i) * out.dt);
    out.integrand.push_back(q);
    if (i < n)
    {
      out.stochastic.push_back(s);
    }
  }
  return out;
}

/// D at grid index i for the chosen difference, computed from `source`.
inline ModeField drift_difference_at(std::size_t i, PathRecord const &source, DriftDifference mode,
                                     SimParams const &params)
{
  if (mode == DriftDifference::pathspace)
  {
    return source.nonlinear.size() == source.states.size() ? source.nonlinear[i]
                                                           : nonlinearity(source.states[i]);
  }
  return auxiliary_drift_field(source.times[i], params, source);
}

/**
 * Series for a saved path. `source` must hold every step and its noise.
 * In pathspace mode D = F(source); compare SNS against OU by passing the
 * OU path (the base law). In auxiliary mode D = Ftilde built from the SNS
 * path, which shares its noise with the base OU path.
 */
inline GirsanovSeries girsanov_series(PathRecord const &source, DriftDifference mode,
                                      SimParams const &params)
{
  if (source.noise.empty())
  {
    throw std::invalid_argument("girsanov_series: path has no stored noise");
  }
  if (source.states.size() != source.noise.size() + 1)
  {
    throw std::invalid_argument("girsanov_series: every step must be saved (save_every = 1)");
  }
  return girsanov_series(
      source.noise, [&](std::size_t i) { return drift_difference_at(i, source, mode, params); },
      params.forcing, params.N);
}

inline double novikov_integral(PathRecord const &source, DriftDifference mode,
                               SimParams const &params, std::optional<double> stop = {},
                               Quadrature q = Quadrature::left_endpoint)
{
  auto const s = girsanov_series(source, mode, params);
  return s.novikov(s.stop_index(stop), q);
}

inline GirsanovRecord log_rn_derivative(PathRecord const &source, DriftDifference mode,
                                        SimParams const &params, std::optional<double> stop = {},
                                        Quadrature q = Quadrature::left_endpoint)
{
  auto const s = girsanov_series(source, mode, params);
  return s.record(s.stop_index(stop), q);
}

enum class StopTrigger
{
  none,
  enstrophy,
  a1_exit
};

/**
 * tau_N = first saved time with ||omega|| > N or |z|_{inf,gamma} > N.
 * `tau` is empty when the path stays inside up to the horizon.
 */
struct StoppingTime
{
  std::optional<double> tau;
  double                threshold{0.0};
  StopTrigger           trigger{StopTrigger::none};

  bool beyond_horizon() const noexcept
  {
    return !tau.has_value();
  }
};

/// Throws unless l + 1 < gamma < l + alpha/2.
inline void check_gamma_window(double gamma, SimParams const &params)
{
  double const l = params.forcing.decay;
  if (!(gamma > l + 1.0 && gamma < l + 0.5 * params.alpha))
  {
    throw std::invalid_argument("gamma must lie in (l + 1, l + alpha/2) = (" +
                                std::to_string(l + 1.0) + ", " +
                                std::to_string(l + 0.5 * params.alpha) + ")");
  }
}

inline StoppingTime stopping_time(CoupledPath const &cp, double threshold, double gamma,
                                  SimParams const &params)
{
  check_gamma_window(gamma, params);
  StoppingTime out;
  out.threshold = threshold;
  for (std::size_t i = 0; i < cp.omega.states.size(); ++i)
  {
    if (norm_l2(cp.omega.states[i]) > threshold)
    {
      out.tau     = cp.omega.times[i];
      out.trigger = StopTrigger::enstrophy;
      return out;
    }
    if (norm_sup_gamma(cp.z.states[i], gamma) > threshold)
    {
      out.tau     = cp.omega.times[i];
      out.trigger = StopTrigger::a1_exit;
      return out;
    }
  }
  return out;
}

/// Smallest integer level l >= 1 with tau_l beyond the horizon.
inline int stopping_level(CoupledPath const &cp, double gamma)
{
  double sup = 0.0;
  for (std::size_t i = 0; i < cp.omega.states.size(); ++i)
  {
    sup = std::max({sup, norm_l2(cp.omega.states[i]), norm_sup_gamma(cp.z.states[i], gamma)});
  }
  return std::max(1, static_cast<int>(std::ceil(sup)));
}

/// Stopped contribution of one path to the relative-entropy estimate.
struct EntropySample
{
  double                stopped_quadratic{0.0};  // 1/2 int_0^{t ^ tau} sum |D|^2 / sigma^2
  double                stopped_novikov{0.0};    // int_0^{t ^ tau} sum |D|^2 / sigma^2
  GirsanovRecord        record;
  int                   level{1};
  std::optional<double> tau;
};

/// One sample per threshold, sharing the series.
inline std::vector<EntropySample> entropy_samples(CoupledPath const &cp, DriftDifference mode,
                                                  SimParams const &params, double gamma,
                                                  std::span<double const> thresholds)
{
  check_gamma_window(gamma, params);
  PathRecord const &source = mode == DriftDifference::pathspace ? cp.z : cp.omega;
  auto const        series = girsanov_series(source, mode, params);
  int const         level  = stopping_level(cp, gamma);
  std::vector<EntropySample> out;
  for (double const n : thresholds)
  {
    auto const    st   = stopping_time(cp, n, gamma, params);
    auto const    stop = series.stop_index(st.tau);
    EntropySample s;
    s.record            = series.record(stop);
    s.stopped_novikov   = series.novikov(stop);
    s.stopped_quadratic = s.record.quadratic_term;
    s.level             = level;
    s.tau               = st.tau;
    out.push_back(s);
  }
  return out;
}

/// Mean and standard error with associative merge.
struct MeanAccumulator
{
  std::size_t n{0};
  double      sum{0.0};
  double      sum_sq{0.0};

  void add(double x) noexcept
  {
    ++n;
    sum += x;
    sum_sq += x * x;
  }

  void merge(MeanAccumulator const &o) noexcept
  {
    n += o.n;
    sum += o.sum;
    sum_sq += o.sum_sq;
  }

  double mean() const noexcept
  {
    return n == 0 ? 0.0 : sum / static_cast<double>(n);
  }

  double variance() const noexcept
  {
    if (n < 2)
    {
      return 0.0;
    }
    double const m = mean();
    return std::max(0.0, (sum_sq - static_cast<double>(n) * m * m) / static_cast<double>(n - 1));
  }

  double standard_error() const noexcept
  {
    return n < 2 ? 0.0 : std::sqrt(variance() / static_cast<double>(n));
  }
};

struct EntropyStratum
{
  int    level{1};
  std::size_t count{0};
  double mean{0.0};
};

struct RelativeEntropyReport
{
  double                      estimate{0.0};  // mean stopped quadratic term
  double                      standard_error{0.0};
  double                      novikov_mean{0.0};
  double                      novikov_se{0.0};
  std::size_t                 paths{0};
  bool                        sufficient{false};  // at least 100 paths
  std::vector<EntropyStratum> strata;
};

/**
 * Accumulates stopped samples. Strata group paths by the level l with
 * tau_l > t >= tau_{l-1}, mirroring the layered sum over exit levels.
 */
class RelativeEntropyAccumulator
{
public:
  void add(EntropySample const &s)
  {
    quadratic_.add(s.stopped_quadratic);
    novikov_.add(s.stopped_novikov);
    strata_[s.level].add(s.stopped_quadratic);
  }

  void merge(RelativeEntropyAccumulator const &o)
  {
    quadratic_.merge(o.quadratic_);
    novikov_.merge(o.novikov_);
    for (auto const &[level, acc] : o.strata_)
    {
      strata_[level].merge(acc);
    }
  }

  std::size_t count() const noexcept
  {
    return quadratic_.n;
  }

  RelativeEntropyReport report() const
  {
    if (quadratic_.n == 0)
    {
      throw std::invalid_argument("relative_entropy_estimate: empty ensemble");
    }
    RelativeEntropyReport out;
    out.estimate       = quadratic_.mean();
    out.standard_error = quadratic_.standard_error();
    out.novikov_mean   = novikov_.mean();
    out.novikov_se     = novikov_.standard_error();
    out.paths          = quadratic_.n;
    out.sufficient     = quadratic_.n >= 100;
    for (auto const &[level, acc] : strata_)
    {
      out.strata.push_back({level, acc.n, acc.mean()});
    }
    return out;
  }

private:
  MeanAccumulator                 quadratic_;
  MeanAccumulator                 novikov_;
  std::map<int, MeanAccumulator>  strata_;
};

inline RelativeEntropyReport relative_entropy_estimate(std::span<CoupledPath const> ensemble,
                                                       DriftDifference mode,
                                                       SimParams const &params, double stop_N,
                                                       double gamma)
{
  RelativeEntropyAccumulator acc;
  double const               thresholds[] = {stop_N};
  for (auto const &cp : ensemble)
  {
    acc.add(entropy_samples(cp, mode, params, gamma, thresholds).front());
  }
  return acc.report();
}

/// One grid value c of P(A) <= H/c + log((e^c - 1) Q(A) + 1) / c.
struct EntropyInequalityRow
{
  double c{0.0};
  double rhs{0.0};
  double margin{0.0};     // rhs - P(A)
  double tolerance{0.0};  // 3 combined standard errors
  bool   holds{false};
};

struct EntropyInequalityReport
{
  double                            p_event{0.0};
  double                            q_event{0.0};
  double                            p_se{0.0};
  double                            q_se{0.0};
  double                            H{0.0};
  std::vector<EntropyInequalityRow> rows;

  bool holds_all() const
  {
    return std::all_of(rows.begin(), rows.end(), [](auto const &r) { return r.holds; });
  }
};

inline double entropy_inequality_rhs(double c, double H, double q)
{
  return H / c + std::log1p(std::expm1(c) * q) / c;
}

inline std::vector<double> default_c_grid()
{
  return {0.5, 1.0, 2.0, 4.0, 8.0};
}

/**
 * Checks the inequality on empirical frequencies. "Holds" allows three
 * standard errors of P(A) and of the right side (through Q(A)).
 */
template <class Sample, class Event>
EntropyInequalityReport entropy_inequality_check(std::span<Sample const> p_samples,
                                                 std::span<Sample const> q_samples, Event &&event,
                                                 double H, std::span<double const> c_grid)
{
  if (p_samples.empty() || q_samples.empty())
  {
    throw std::invalid_argument("entropy_inequality_check: need samples of both laws");
  }
  auto freq = [&](std::span<Sample const> xs) {
    double hits = 0.0;
    for (auto const &x : xs)
    {
      hits += event(x) ? 1.0 : 0.0;
    }
    return hits / static_cast<double>(xs.size());
  };
  EntropyInequalityReport out;
  out.H       = H;
  out.p_event = freq(p_samples);
  out.q_event = freq(q_samples);
  out.p_se    = std::sqrt(out.p_event * (1.0 - out.p_event) / static_cast<double>(p_samples.size()));
  out.q_se    = std::sqrt(out.q_event * (1.0 - out.q_event) / static_cast<double>(q_samples.size()));
  for (double const c : c_grid)
  {
    if (!(c > 0.0))
    {
      throw std::invalid_argument("entropy_inequality_check: c must be > 0");
    }
    EntropyInequalityRow row;
    row.c               = c;
    row.rhs             = entropy_inequality_rhs(c, H, out.q_event);
    row.margin          = row.rhs - out.p_event;
    double const slope  = std::expm1(c) / (c * (1.0 + std::expm1(c) * out.q_event));
    row.tolerance       = 3.0 * std::hypot(out.p_se, slope * out.q_se);
    row.holds           = row.margin >= -row.tolerance;
    out.rows.push_back(row);
  }
  return out;
}

/**
 * Two laws of a scalar OU path on [0, T] from X_0 = 0:
 *   Q: dX = -theta X dt + dB,   P: dX = (-theta X + m) dt + dB.
 * H(P|Q) = m^2 T / 2 and dP/dQ = exp(m B_T - m^2 T / 2) along Q paths.
 */
struct OuShiftToy
{
  double theta{1.0};
  double shift{0.5};
  double horizon{1.0};

  double relative_entropy() const noexcept
  {
    return 0.5 * shift * shift * horizon;
  }

  double terminal_variance() const noexcept
  {
    return -std::expm1(-2.0 * theta * horizon) / (2.0 * theta);
  }

  double terminal_mean(bool shifted) const noexcept
  {
    return shifted ? -shift * std::expm1(-theta * horizon) / theta : 0.0;
  }

  /// P(X_T > a) under P (shifted) or Q.
  double prob_exceeds(double a, bool shifted) const
  {
    boost::math::normal_distribution<double> law(terminal_mean(shifted), std::sqrt(terminal_variance()));
    return boost::math::cdf(boost::math::complement(law, a));
  }
};

struct ToyPath
{
  double x_terminal{0.0};
  double log_rn{0.0};  // log dP/dQ along this path
};

/**
 * Exact simulation on `steps` sub-intervals: each step draws the pair
 * (dB, int e^{-theta (h - s)} dB) from its joint Gaussian law, so the
 * terminal value and B_T are exact.
 */
inline std::vector<ToyPath> sample_ou_shift_toy(OuShiftToy const &toy, bool shifted,
                                                std::uint64_t key, std::size_t count,
                                                std::size_t steps = 50)
{
  if (steps == 0 || !(toy.theta > 0.0) || !(toy.horizon > 0.0))
  {
    throw std::invalid_argument("sample_ou_shift_toy: theta, horizon and steps must be positive");
  }
  double const h     = toy.horizon / static_cast<double>(steps);
  double const decay = std::exp(-toy.theta * h);
  double const v_b   = h;
  double const v_i   = -std::expm1(-2.0 * toy.theta * h) / (2.0 * toy.theta);
  double const cov   = -std::expm1(-toy.theta * h) / toy.theta;
  double const a21   = cov / std::sqrt(v_b);
  double const a22   = std::sqrt(std::max(0.0, v_i - a21 * a21));
  double const drift = shifted ? toy.shift * cov : 0.0;
  NormalStream normal(key, shifted ? 1u : 2u);
  std::vector<ToyPath> out;
  out.reserve(count);
  for (std::size_t p = 0; p < count; ++p)
  {
    double x = 0.0;
    double b = 0.0;
    for (std::size_t s = 0; s < steps; ++s)
    {
      double const g1 = normal();
      double const g2 = normal();
      double const db = std::sqrt(v_b) * g1;
      x               = decay * x + drift + a21 * g1 + a22 * g2;
      b += db;
    }
    // b is the driver of the sampled law; under P the Q-driver is b + m t.
    double const H = toy.relative_entropy();
    out.push_back({x, toy.shift * b + (shifted ? H : -H)});
  }
  return out;
}

}  // namespace smallscale
