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

// Statistics of rescaled modes: moments, autocovariance, Kolmogorov-Smirnov
// distance, bounded path functionals, weak-convergence tables, trend tests
// and the long-run stationary diagnostic.

#include "smallscale/dynamics.hpp"
#include "smallscale/girsanov.hpp"
#include "smallscale/lattice.hpp"
#include "smallscale/random.hpp"

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace smallscale {

/// sqrt2: sqrt(2)|k|^{alpha/2}/sigma_k.  unit_variance: sqrt(2 nu)|k|^{alpha/2}/sigma_k.
enum class Scaling
{
  sqrt2,
  unit_variance
};

inline double rescale_factor(WaveVector k, SimParams const &params, Scaling scaling)
{
  double const sigma = params.forcing.sigma(k);
  if (!(sigma > 0.0))
  {
    throw std::invalid_argument("rescale: mode is not forced");
  }
  double const base = std::pow(k.norm(), 0.5 * params.alpha) / sigma;
  return (scaling == Scaling::sqrt2 ? std::sqrt(2.0) : std::sqrt(2.0 * params.nu)) * base;
}

struct RescaledPath
{
  WaveVector           k{1, 0};
  Scaling              scaling{Scaling::unit_variance};
  double               factor{1.0};
  std::vector<double>  times;
  std::vector<complex> samples;
};

inline RescaledPath rescale(PathRecord const &path, WaveVector k, SimParams const &params,
                            Scaling scaling = Scaling::unit_variance)
{
  if (path.states.empty())
  {
    throw std::invalid_argument("rescale: empty path");
  }
  auto const   idx = path.states.front().index(k);
  RescaledPath out;
  out.k       = k;
  out.scaling = scaling;
  out.factor  = rescale_factor(k, params, scaling);
  out.times   = path.times;
  out.samples.reserve(path.states.size());
  for (auto const &s : path.states)
  {
    out.samples.push_back(out.factor * s.at_index(idx));
  }
  return out;
}

/**
 * mean over n of x[n + lag] conj(x[n]) on the segment starting at `from`.
 */
inline std::vector<complex> autocovariance(std::span<complex const> x, std::span<std::size_t const> lags,
                                           std::size_t from = 0)
{
  if (from >= x.size())
  {
    throw std::out_of_range("autocovariance: stationary segment is empty");
  }
  auto const           len = x.size() - from;
  std::vector<complex> out;
  out.reserve(lags.size());
  for (auto const lag : lags)
  {
    if (lag >= len)
    {
      throw std::out_of_range("autocovariance: lag beyond the segment");
    }
    complex acc{0.0, 0.0};
    for (std::size_t n = from; n + lag < x.size(); ++n)
    {
      acc += x[n + lag] * std::conj(x[n]);
    }
    out.push_back(acc / static_cast<double>(len - lag));
  }
  return out;
}

inline std::vector<complex> autocovariance(RescaledPath const &rp, std::span<std::size_t const> lags,
                                           std::size_t from = 0)
{
  return autocovariance(std::span<complex const>(rp.samples), lags, from);
}

struct DecayFit
{
  double rate{0.0};
  double log_amplitude{0.0};
  std::size_t points{0};
};

/// Least-squares line through (tau, log Re C(tau)) over the lags with Re C > 0.
inline DecayFit fit_decay_rate(std::span<complex const> acov, std::span<double const> lag_times)
{
  if (acov.size() != lag_times.size())
  {
    throw std::invalid_argument("fit_decay_rate: size mismatch");
  }
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < acov.size(); ++i)
  {
    if (!(acov[i].real() > 0.0))
    {
      continue;
    }
    double const x = lag_times[i];
    double const y = std::log(acov[i].real());
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++n;
  }
  if (n < 2)
  {
    throw std::invalid_argument("fit_decay_rate: fewer than two positive lags");
  }
  double const dn    = static_cast<double>(n);
  double const slope = (dn * sxy - sx * sy) / (dn * sxx - sx * sx);
  return {-slope, (sy - slope * sx) / dn, n};
}

/// Two-sided KS statistic of `xs` against a continuous cdf.
template <class Cdf>
double ks_statistic(std::vector<double> xs, Cdf &&cdf)
{
  std::sort(xs.begin(), xs.end());
  double const n = static_cast<double>(xs.size());
  double       d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i)
  {
    double const f = cdf(xs[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

/**
 * max of the KS statistics of the real and the imaginary parts against
 * N(0, 1/2), the marginals of a standard complex Gaussian.
 */
inline double ks_distance_to_standard_gaussian(std::span<complex const> samples)
{
  if (samples.size() < 100)
  {
    throw std::invalid_argument("ks_distance_to_standard_gaussian: at least 100 samples required");
  }
  boost::math::normal_distribution<double> const law(0.0, std::sqrt(0.5));
  auto cdf = [&](double x) { return boost::math::cdf(law, x); };
  std::vector<double> re, im;
  re.reserve(samples.size());
  im.reserve(samples.size());
  for (auto const &z : samples)
  {
    re.push_back(z.real());
    im.push_back(z.imag());
  }
  return std::max(ks_statistic(std::move(re), cdf), ks_statistic(std::move(im), cdf));
}

/// Bootstrap standard error of the statistic above, deterministic in `key`.
inline double ks_bootstrap_se(std::span<complex const> samples, std::uint64_t key, int reps = 200)
{
  MeanAccumulator      acc;
  std::vector<complex> draw(samples.size());
  auto const           n = static_cast<double>(samples.size());
  for (int r = 0; r < reps; ++r)
  {
    for (std::size_t i = 0; i < samples.size(); ++i)
    {
      double const u = uniform01(key, static_cast<std::uint32_t>(r), static_cast<std::uint32_t>(i), 0xB007u);
      draw[i]        = samples[std::min(samples.size() - 1, static_cast<std::size_t>(u * n))];
    }
    acc.add(ks_distance_to_standard_gaussian(draw));
  }
  return std::sqrt(acc.variance());
}

/**
 * Bounded functional of a d-tuple of rescaled paths, with its declared
 * bound sup|G| and modulus of continuity in the sup norm.
 */
struct PathFunctional
{
  std::string                                           name;
  double                                                bound{0.0};
  std::function<double(double)>                         modulus;
  std::function<double(std::span<RescaledPath const>)> eval;

  double operator()(std::span<RescaledPath const> x) const
  {
    return eval(x);
  }
};

namespace functionals {

inline PathFunctional constant(double c)
{
  return {"constant", std::abs(c), [](double) { return 0.0; },
          [c](std::span<RescaledPath const>) { return c; }};
}

/// min(B, max_i sup_s |x_i(s)|).
inline PathFunctional sup_norm_clamp(double B)
{
  return {"sup_norm_clamp", B, [](double d) { return d; },
          [B](std::span<RescaledPath const> xs) {
            double m = 0.0;
            for (auto const &x : xs)
            {
              for (auto const &v : x.samples)
              {
                m = std::max(m, std::abs(v));
              }
            }
            return std::min(B, m);
          }};
}

/// min(B, max_i |mean of x_i over [t0, t1]|), trapezoid in time.
inline PathFunctional windowed_mean_clamp(double B, double t0, double t1)
{
  if (!(t1 > t0))
  {
    throw std::invalid_argument("windowed_mean_clamp: empty window");
  }
  return {"windowed_mean_clamp", B, [](double d) { return d; },
          [B, t0, t1](std::span<RescaledPath const> xs) {
            double m = 0.0;
            for (auto const &x : xs)
            {
              complex acc{0.0, 0.0};
              double  span = 0.0;
              for (std::size_t i = 0; i + 1 < x.times.size(); ++i)
              {
                double const a = std::max(x.times[i], t0);
                double const b = std::min(x.times[i + 1], t1);
                if (b > a)
                {
                  acc += 0.5 * (b - a) * (x.samples[i] + x.samples[i + 1]);
                  span += b - a;
                }
              }
              if (span > 0.0)
              {
                m = std::max(m, std::abs(acc / span));
              }
            }
            return std::min(B, m);
          }};
}

/// min(B, max_i |x_i(t)|) at the final time.
inline PathFunctional terminal_clamp(double B)
{
  return {"terminal_clamp", B, [](double d) { return d; },
          [B](std::span<RescaledPath const> xs) {
            double m = 0.0;
            for (auto const &x : xs)
            {
              m = std::max(m, std::abs(x.samples.back()));
            }
            return std::min(B, m);
          }};
}

/// clamp(max_i sup_s Re x_i(s), -B, B).
inline PathFunctional running_max_clamp(double B)
{
  return {"running_max_clamp", B, [](double d) { return d; },
          [B](std::span<RescaledPath const> xs) {
            double m = -std::numeric_limits<double>::infinity();
            for (auto const &x : xs)
            {
              for (auto const &v : x.samples)
              {
                m = std::max(m, v.real());
              }
            }
            return std::clamp(m, -B, B);
          }};
}

inline PathFunctional by_name(std::string const &name, double B, double horizon)
{
  if (name == "sup_norm_clamp")
  {
    return sup_norm_clamp(B);
  }
  if (name == "terminal_clamp")
  {
    return terminal_clamp(B);
  }
  if (name == "running_max_clamp")
  {
    return running_max_clamp(B);
  }
  if (name == "windowed_mean_clamp")
  {
    return windowed_mean_clamp(B, 0.5 * horizon, horizon);
  }
  throw std::invalid_argument("unknown functional '" + name +
                              "' (sup_norm_clamp, terminal_clamp, running_max_clamp, windowed_mean_clamp)");
}

}  // namespace functionals

inline double min_norm(std::span<WaveVector const> ks)
{
  double m = std::numeric_limits<double>::infinity();
  for (auto const k : ks)
  {
    m = std::min(m, k.norm());
  }
  return m;
}

/// |w_k(0)| <= D / |k|^r for every k, with the worst ratio located.
struct InitialDecayReport
{
  bool       satisfied{true};
  double     worst_ratio{0.0};  // max |k|^r |w_k(0)| / D
  WaveVector worst_mode{1, 0};
  /// limsup sigma_k^2 |k|^{2r - alpha} = K2^2 lim |k|^{2r - alpha - 2l}: 0, K2^2 or inf.
  double     sigma_limsup{0.0};
};

inline InitialDecayReport initial_condition_check(ModeField const &w0, double D, double r,
                                                  SimParams const &params)
{
  InitialDecayReport out;
  for (std::size_t i = w0.centre() + 1; i < w0.size(); ++i)
  {
    auto const   k     = w0.wave_vector(i);
    double const ratio = std::pow(k.norm(), r) * std::abs(w0.at_index(i)) / D;
    if (ratio > out.worst_ratio)
    {
      out.worst_ratio = ratio;
      out.worst_mode  = k;
    }
  }
  out.satisfied       = out.worst_ratio <= 1.0;
  double const expo   = 2.0 * r - params.alpha - 2.0 * params.forcing.decay;
  double const k2     = params.forcing.amplitude * params.forcing.amplitude;
  out.sigma_limsup    = expo < 0.0 ? 0.0 : (expo == 0.0 ? k2 : std::numeric_limits<double>::infinity());
  return out;
}

struct WeakConvergenceRow
{
  std::vector<WaveVector> ks;
  double                  min_k{0.0};
  std::string             functional;
  double                  estimate{0.0};
  double                  standard_error{0.0};
  std::size_t             n_paths{0};
};

/**
 * Streams coupled paths and accumulates |G(omega') - G(z')| per tuple.
 * Tuples must be sorted by min |k_i|.
 */
class WeakConvergenceAccumulator
{
public:
  WeakConvergenceAccumulator(std::vector<std::vector<WaveVector>> tuples, PathFunctional G,
                             SimParams params, Scaling scaling = Scaling::unit_variance)
    : tuples_(std::move(tuples))
    , G_(std::move(G))
    , params_(params)
    , scaling_(scaling)
    , acc_(tuples_.size())
  {
    for (std::size_t i = 1; i < tuples_.size(); ++i)
    {
      if (min_norm(tuples_[i]) < min_norm(tuples_[i - 1]))
      {
        throw std::invalid_argument("weak_convergence_test: tuples must be sorted by min |k|");
      }
    }
    for (auto const &t : tuples_)
    {
      if (t.empty())
      {
        throw std::invalid_argument("weak_convergence_test: empty tuple");
      }
    }
  }

  void add(PathRecord const &omega, PathRecord const &z)
  {
    for (std::size_t i = 0; i < tuples_.size(); ++i)
    {
      std::vector<RescaledPath> a, b;
      for (auto const k : tuples_[i])
      {
        a.push_back(rescale(omega, k, params_, scaling_));
        b.push_back(rescale(z, k, params_, scaling_));
      }
      acc_[i].add(std::abs(G_(a) - G_(b)));
    }
  }

  void add(CoupledPath const &cp)
  {
    add(cp.omega, cp.z);
  }

  void merge(WeakConvergenceAccumulator const &o)
  {
    for (std::size_t i = 0; i < acc_.size(); ++i)
    {
      acc_[i].merge(o.acc_[i]);
    }
  }

  std::vector<WeakConvergenceRow> table() const
  {
    std::vector<WeakConvergenceRow> rows;
    for (std::size_t i = 0; i < tuples_.size(); ++i)
    {
      rows.push_back({tuples_[i], min_norm(tuples_[i]), G_.name, acc_[i].mean(),
                      acc_[i].standard_error(), acc_[i].n});
    }
    return rows;
  }

private:
  std::vector<std::vector<WaveVector>> tuples_;
  PathFunctional                       G_;
  SimParams                            params_;
  Scaling                              scaling_;
  std::vector<MeanAccumulator>         acc_;
};

struct WeakConvergenceReport
{
  std::vector<WeakConvergenceRow> rows;
  std::size_t                     initial_violations{0};  // paths failing |w_k(0)| <= D/|k|^r
};

struct InitialDecay
{
  double D{1.0};
  double r{1.0};
};

inline WeakConvergenceReport weak_convergence_test(std::span<CoupledPath const>         ensemble,
                                                   std::vector<std::vector<WaveVector>> tuples,
                                                   PathFunctional const &G, SimParams const &params,
                                                   Scaling                     scaling = Scaling::unit_variance,
                                                   std::optional<InitialDecay> decay   = {})
{
  WeakConvergenceAccumulator acc(std::move(tuples), G, params, scaling);
  WeakConvergenceReport      out;
  for (auto const &cp : ensemble)
  {
    if (decay && !initial_condition_check(cp.omega.states.front(), decay->D, decay->r, params).satisfied)
    {
      ++out.initial_violations;
    }
    acc.add(cp);
  }
  out.rows = acc.table();
  return out;
}

/**
 * Trend test for estimates listed in increasing |k|. The weighted
 * nonincreasing fit uses pool-adjacent-violators with weights 1/se^2.
 */
struct TrendTest
{
  std::vector<double> fitted;
  double              max_deviation_se{0.0};
  bool                nonincreasing_within_noise{false};
  bool                strictly_decreasing{false};
};

inline std::vector<double> isotonic_nonincreasing(std::span<double const> y, std::span<double const> w)
{
  struct Block
  {
    double      value;
    double      weight;
    std::size_t count;
  };
  std::vector<Block> blocks;
  for (std::size_t i = 0; i < y.size(); ++i)
  {
    blocks.push_back({y[i], w[i], 1});
    while (blocks.size() > 1 && blocks[blocks.size() - 2].value < blocks.back().value)
    {
      auto const b = blocks.back();
      blocks.pop_back();
      auto &a  = blocks.back();
      a.value  = (a.value * a.weight + b.value * b.weight) / (a.weight + b.weight);
      a.weight += b.weight;
      a.count += b.count;
    }
  }
  std::vector<double> out;
  for (auto const &b : blocks)
  {
    out.insert(out.end(), b.count, b.value);
  }
  return out;
}

inline TrendTest decreasing_trend_test(std::span<double const> estimate, std::span<double const> se,
                                       double z = 3.0)
{
  if (estimate.size() != se.size() || estimate.empty())
  {
    throw std::invalid_argument("decreasing_trend_test: need matching nonempty inputs");
  }
  double const        floor = 1e-300;
  std::vector<double> w;
  for (double s : se)
  {
    w.push_back(1.0 / std::max(s * s, floor));
  }
  TrendTest out;
  out.fitted = isotonic_nonincreasing(estimate, w);
  for (std::size_t i = 0; i < estimate.size(); ++i)
  {
    double const dev = std::abs(estimate[i] - out.fitted[i]);
    out.max_deviation_se = std::max(out.max_deviation_se, dev == 0.0 ? 0.0 : dev / std::max(se[i], floor));
  }
  out.nonincreasing_within_noise = out.max_deviation_se <= z;
  out.strictly_decreasing        = true;
  for (std::size_t i = 1; i < estimate.size(); ++i)
  {
    double const drop = estimate[i - 1] - estimate[i];
    if (!(drop > z * std::hypot(se[i - 1], se[i])))
    {
      out.strictly_decreasing = false;
    }
  }
  return out;
}

/// Batch-means estimate of the mean of a correlated series.
struct BatchMeans
{
  double      mean{0.0};
  double      standard_error{0.0};
  std::size_t batches{0};
  std::size_t batch_size{0};
  double      lag1_correlation{0.0};  // between consecutive batch means
};

inline BatchMeans batch_means(std::span<double const> x, std::size_t batches = 20)
{
  if (batches < 2 || x.size() < 10 * batches)
  {
    throw std::invalid_argument("batch_means: insufficient effective samples");
  }
  BatchMeans out;
  out.batches    = batches;
  out.batch_size = x.size() / batches;
  std::vector<double> means;
  MeanAccumulator     acc;
  for (std::size_t b = 0; b < batches; ++b)
  {
    double s = 0.0;
    for (std::size_t i = 0; i < out.batch_size; ++i)
    {
      s += x[b * out.batch_size + i];
    }
    means.push_back(s / static_cast<double>(out.batch_size));
    acc.add(means.back());
  }
  out.mean           = acc.mean();
  out.standard_error = acc.standard_error();
  double num = 0.0, den = 0.0;
  for (std::size_t b = 0; b < batches; ++b)
  {
    den += (means[b] - out.mean) * (means[b] - out.mean);
    if (b + 1 < batches)
    {
      num += (means[b] - out.mean) * (means[b + 1] - out.mean);
    }
  }
  out.lag1_correlation = den > 0.0 ? num / den : 0.0;
  return out;
}

/// Named scalar time series sampled after burn-in.
struct ObservableSeries
{
  std::string         name;
  std::vector<double> values;
};

/// Enstrophy and |w_k|^2 for k = (1,0), (0,1), (1,1).
class StandardObservables
{
public:
  explicit StandardObservables(double burn_in, std::size_t stride = 1)
    : burn_in_(burn_in)
    , stride_(stride)
    , series_{{"enstrophy", {}}, {"mode_1_0", {}}, {"mode_0_1", {}}, {"mode_1_1", {}}}
  {}

  void operator()(std::size_t step, double t, ModeField const &w)
  {
    if (t < burn_in_ || step % stride_ != 0)
    {
      return;
    }
    double const n = norm_l2(w);
    series_[0].values.push_back(n * n);
    series_[1].values.push_back(std::norm(w[WaveVector{1, 0}]));
    series_[2].values.push_back(std::norm(w[WaveVector{0, 1}]));
    series_[3].values.push_back(std::norm(w[WaveVector{1, 1}]));
  }

  std::vector<ObservableSeries> const &series() const noexcept
  {
    return series_;
  }

private:
  double                        burn_in_;
  std::size_t                   stride_;
  std::vector<ObservableSeries> series_;
};

struct StationaryComparison
{
  std::string name;
  BatchMeans  a;
  BatchMeans  b;
  double      z{0.0};  // |mean_a - mean_b| / combined se
  bool        agree{false};
  double      ou_overlap{std::numeric_limits<double>::quiet_NaN()};  // fraction of run a inside OU's central 99%
};

struct StationaryReport
{
  std::vector<StationaryComparison> rows;

  bool all_agree() const
  {
    return !rows.empty() && std::all_of(rows.begin(), rows.end(), [](auto const &r) { return r.agree; });
  }
};

/**
 * Compares time averages of two long runs within `z` combined standard
 * errors (batch means). With an OU run, also reports the fraction of
 * samples of run a inside the central 99% of the OU samples.
 */
inline StationaryReport stationary_diagnostic(std::span<ObservableSeries const> run_a,
                                              std::span<ObservableSeries const> run_b,
                                              std::span<ObservableSeries const> run_ou = {},
                                              std::size_t batches = 20, double z = 3.0)
{
  if (run_a.size() != run_b.size() || (!run_ou.empty() && run_ou.size() != run_a.size()))
  {
    throw std::invalid_argument("stationary_diagnostic: observable sets differ");
  }
  StationaryReport out;
  for (std::size_t i = 0; i < run_a.size(); ++i)
  {
    StationaryComparison row;
    row.name          = run_a[i].name;
    row.a             = batch_means(run_a[i].values, batches);
    row.b             = batch_means(run_b[i].values, batches);
    double const se   = std::hypot(row.a.standard_error, row.b.standard_error);
    row.z             = se > 0.0 ? std::abs(row.a.mean - row.b.mean) / se : 0.0;
    row.agree         = row.z <= z;
    if (!run_ou.empty())
    {
      auto sorted = run_ou[i].values;
      std::sort(sorted.begin(), sorted.end());
      auto const   n  = sorted.size();
      double const lo = sorted[static_cast<std::size_t>(0.005 * static_cast<double>(n - 1))];
      double const hi = sorted[static_cast<std::size_t>(0.995 * static_cast<double>(n - 1))];
      double inside   = 0.0;
      for (double v : run_a[i].values)
      {
        inside += (v >= lo && v <= hi) ? 1.0 : 0.0;
      }
      row.ou_overlap = inside / static_cast<double>(run_a[i].values.size());
    }
    out.rows.push_back(row);
  }
  return out;
}

/// Long SNS run from omega0 (OU from z0), observables recorded after burn-in.
struct LongRun
{
  std::vector<ObservableSeries> sns;
  std::vector<ObservableSeries> ou;
};

inline LongRun long_run_observables(ModeField const &omega0, ModeField const &z0,
                                    SimParams const &params, std::uint64_t trajectory,
                                    double burn_in, std::size_t stride = 1)
{
  if (!(params.forcing.amplitude > 0.0))
  {
    throw std::invalid_argument("stationary diagnostic requires every mode forced (amplitude > 0)");
  }
  StandardObservables sns(burn_in, stride), ou(burn_in, stride);
  simulate_streaming(omega0, z0, params, trajectory,
                     [&](std::size_t step, double t, ModeField const &w, ModeField const &z) {
                       sns(step, t, w);
                       ou(step, t, z);
                     });
  return {sns.series(), ou.series()};
}

}  // namespace smallscale
