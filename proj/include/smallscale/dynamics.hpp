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

#include "smallscale/forcing.hpp"
#include "smallscale/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace smallscale {

/**
 * Parameters of one Galerkin run: dissipation nu |k|^alpha on K_N, step dt
 * up to `horizon`, forcing spectrum and master seed.
 */
struct SimParams
{
  double          nu{1.0};
  double          alpha{2.0};
  int             N{8};
  double          dt{1e-3};
  double          horizon{1.0};
  ForcingSpectrum forcing{};
  std::uint64_t   seed{0};
  double          blowup_guard{1e6};
  int             save_every{1};

  std::size_t steps() const
  {
    return static_cast<std::size_t>(std::llround(horizon / dt));
  }

  double dissipation(WaveVector k) const
  {
    return nu * std::pow(k.norm(), alpha);
  }

  /// Throws std::invalid_argument naming the first violated constraint.
  void validate() const
  {
    auto fail = [](std::string const &what) { throw std::invalid_argument("SimParams: " + what); };
    if (!(nu > 0.0))
    {
      fail("nu > 0 required");
    }
    if (!(alpha >= 2.0))
    {
      fail("alpha >= 2 required");
    }
    if (N < 1)
    {
      fail("truncation N >= 1 required");
    }
    if (!(dt > 0.0) || !(dt < horizon))
    {
      fail("0 < dt < horizon required");
    }
    auto const m = static_cast<double>(steps());
    if (std::abs(m * dt - horizon) > 1e-9 * horizon)
    {
      fail("horizon must be an integer multiple of dt");
    }
    if (forcing.amplitude < 0.0)
    {
      fail("forcing amplitude must be >= 0");
    }
    if (save_every < 1)
    {
      fail("save_every >= 1 required");
    }
    if (!(blowup_guard > 0.0))
    {
      fail("blowup_guard > 0 required");
    }
  }
};

/// Raised when ||omega|| leaves the blow-up guard; carries the step and time.
class BlowUpError : public std::runtime_error
{
public:
  BlowUpError(std::size_t step, double time, double norm)
    : std::runtime_error(describe(step, time, norm))
    , step_(step)
    , time_(time)
    , norm_(norm)
  {}

  std::size_t step() const noexcept
  {
    return step_;
  }
  double time() const noexcept
  {
    return time_;
  }
  double norm() const noexcept
  {
    return norm_;
  }

private:
  static std::string describe(std::size_t step, double time, double norm)
  {
    std::ostringstream os;
    os << "blow-up guard tripped at step " << step << " (t=" << time << "): ||omega|| = " << norm
       << "; reduce dt";
    return os.str();
  }

  std::size_t step_;
  double      time_;
  double      norm_;
};

/**
 * Time-indexed states plus the increments that produced them.
 *
 * `states[i]` is the field at `times[i]`; slices are kept every `save_every`
 * steps and the final step is always kept. `noise[n]` drives step n and is
 * stored at full resolution. `nonlinear`, when filled, caches F(states[i]).
 */
struct PathRecord
{
  double                         dt{0.0};
  int                            save_every{1};
  std::vector<double>            times;
  std::vector<ModeField>         states;
  std::vector<NoiseIncrementSet> noise;
  std::vector<ModeField>         nonlinear;

  double horizon() const
  {
    return times.empty() ? 0.0 : times.back();
  }
};

/// SNS path, OU path and their difference rho = omega - z on one driver.
struct CoupledPath
{
  PathRecord omega;
  PathRecord z;
  PathRecord rho;
};

/**
 * Truncated nonlinearity
 *
 *   F(w)_k = sum_{l + j = k; l, j in K_N} (l_perp . k) / |l|^2 w_l w_j,
 *
 * which is -(u . grad w)_k for the velocity u_l = i l_perp w_l / |l|^2. The
 * prefactor is real: a purely imaginary one would give F_{-k} = -conj(F_k)
 * and the field would stop being real.
 *
 * Direct O(N^4) convolution. Only the upper half of k is computed and the
 * result mirrored, so the output is conjugate symmetric bit for bit. Uses
 * w_{k-l} = conj(w_{l-k}) so both operands stream forward in memory.
 */
inline ModeField nonlinearity(ModeField const &omega)
{
  int const   N    = omega.truncation();
  int const   side = 2 * N + 1;
  auto const  n    = omega.size();
  auto const  src  = omega.data();
  std::vector<double> re(n), im(n), inv2(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
  {
    re[i] = src[i].real();
    im[i] = src[i].imag();
    auto const k = omega.wave_vector(i);
    if (!k.is_zero())
    {
      inv2[i] = 1.0 / k.norm_squared();
    }
  }

  ModeField out(N);
  for (std::size_t idx = omega.centre() + 1; idx < n; ++idx)
  {
    auto const k  = omega.wave_vector(idx);
    int const  l1_lo = std::max(-N, k.k1 - N);
    int const  l1_hi = std::min(N, k.k1 + N);
    int const  l2_lo = std::max(-N, k.k2 - N);
    int const  l2_hi = std::min(N, k.k2 + N);
    int const  len   = l2_hi - l2_lo + 1;
    double acc_re = 0.0;
    double acc_im = 0.0;
    for (int l1 = l1_lo; l1 <= l1_hi; ++l1)
    {
      auto const row_l = static_cast<std::size_t>((l1 + N) * side + (l2_lo + N));
      auto const row_m = static_cast<std::size_t>((l1 - k.k1 + N) * side + (l2_lo - k.k2 + N));
      double const *ar = re.data() + row_l;
      double const *ai = im.data() + row_l;
      double const *cr = re.data() + row_m;
      double const *ci = im.data() + row_m;
      double const *w2 = inv2.data() + row_l;
      double const  base = static_cast<double>(l1 * k.k2);
      double const  kk1  = static_cast<double>(k.k1);
      double sr = 0.0;
      double si = 0.0;
      for (int t = 0; t < len; ++t)
      {
        double const l2 = static_cast<double>(l2_lo + t);
        double const w  = (base - l2 * kk1) * w2[t];
        // w_l * conj(w_{l-k})
        double const pr = ar[t] * cr[t] + ai[t] * ci[t];
        double const pi = ai[t] * cr[t] - ar[t] * ci[t];
        sr += w * pr;
        si += w * pi;
      }
      acc_re += sr;
      acc_im += si;
    }
    out.set_index(idx, complex{acc_re, acc_im});
  }
  return out;
}

/**
 * Exponential Euler-Maruyama update on a fixed grid:
 *
 *   x_k <- e^{-lambda_k dt} (x_k + d_k dt) + sigma_k g_k,
 *   g_k  = dbeta_k * sqrt((1 - e^{-2 lambda_k dt}) / (2 lambda_k dt)),
 *
 * with lambda_k = nu |k|^alpha. g_k has exactly the variance of the
 * stochastic convolution over one step, and SNS and OU steps that share
 * dbeta share g.
 */
class ExponentialIntegrator
{
public:
  explicit ExponentialIntegrator(SimParams const &params)
    : ExponentialIntegrator(params, params.dt)
  {}

  ExponentialIntegrator(SimParams const &params, double dt)
    : N_(params.N)
    , dt_(dt)
  {
    ModeField probe(N_);
    auto const n = probe.size();
    rate_.assign(n, 0.0);
    decay_.assign(n, 0.0);
    noise_scale_.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
    {
      auto const k = probe.wave_vector(i);
      if (k.is_zero())
      {
        continue;
      }
      double const lambda = params.dissipation(k);
      double const e      = std::exp(-lambda * dt);
      rate_[i]            = lambda;
      decay_[i]           = e;
      // -expm1 keeps 1 - e^{-2 lambda dt} accurate for soft modes.
      double const var_ratio = -std::expm1(-2.0 * lambda * dt) / (2.0 * lambda * dt);
      noise_scale_[i]        = params.forcing.sigma(k) * std::sqrt(var_ratio);
    }
  }

  double dt() const noexcept
  {
    return dt_;
  }

  double decay(std::size_t i) const noexcept
  {
    return decay_[i];
  }

  double rate(std::size_t i) const noexcept
  {
    return rate_[i];
  }

  /// Advances x by one step with drift d (held at its left-endpoint value).
  ModeField step(ModeField const &x, ModeField const &drift, NoiseIncrementSet const &dbeta) const
  {
    check(x);
    check(drift);
    check(dbeta.increments);
    ModeField out(N_);
    auto const xs = x.data();
    auto const ds = drift.data();
    auto const bs = dbeta.increments.data();
    for (std::size_t i = x.centre() + 1; i < x.size(); ++i)
    {
      out.set_index(i, decay_[i] * (xs[i] + ds[i] * dt_) + noise_scale_[i] * bs[i]);
    }
    return out;
  }

private:
  void check(ModeField const &f) const
  {
    if (f.truncation() != N_)
    {
      throw std::invalid_argument("ExponentialIntegrator: truncation mismatch");
    }
  }

  int                 N_;
  double              dt_;
  std::vector<double> rate_;
  std::vector<double> decay_;
  std::vector<double> noise_scale_;
};

/// One exact OU step of dz_k = -nu|k|^alpha z_k dt + sigma_k dbeta_k.
inline ModeField step_ou(ModeField const &z, SimParams const &params, NoiseIncrementSet const &dbeta)
{
  ExponentialIntegrator const integrator(params, dbeta.dt);
  return integrator.step(z, ModeField(params.N), dbeta);
}

/// One SNS step sharing the OU step's Gaussian; checks the blow-up guard.
inline ModeField step_sns(ModeField const &omega, SimParams const &params,
                          NoiseIncrementSet const &dbeta)
{
  ExponentialIntegrator const integrator(params, dbeta.dt);
  auto next = integrator.step(omega, nonlinearity(omega), dbeta);
  auto const norm = norm_l2(next);
  if (!(norm <= params.blowup_guard))
  {
    throw BlowUpError(1, dbeta.dt, norm);
  }
  return next;
}

namespace detail {

inline bool is_saved_step(std::size_t step, std::size_t total, int stride)
{
  return step % static_cast<std::size_t>(stride) == 0 || step == total;
}

inline PathRecord empty_record(SimParams const &params)
{
  PathRecord r;
  r.dt         = params.dt;
  r.save_every = params.save_every;
  return r;
}

inline void check_noise(SimParams const &params, std::vector<NoiseIncrementSet> const &noise)
{
  if (noise.size() != params.steps())
  {
    throw std::invalid_argument("noise record has " + std::to_string(noise.size()) +
                                " increments, expected " + std::to_string(params.steps()));
  }
  for (auto const &inc : noise)
  {
    if (std::abs(inc.dt - params.dt) > 1e-12 * params.dt || inc.increments.truncation() != params.N)
    {
      throw std::invalid_argument("noise record does not match the time step or truncation");
    }
  }
}

}  // namespace detail

struct SimulationOptions
{
  /// Cache F(omega) at every saved slice of the omega record.
  bool keep_nonlinear{false};
};

/**
 * Runs SNS and OU from the same initial field on the supplied increments.
 * rho is recorded at every saved slice; rho(0) = 0.
 */
inline CoupledPath simulate_coupled(ModeField const &omega0, SimParams const &params,
                                    std::vector<NoiseIncrementSet> noise,
                                    SimulationOptions const       &options = {})
{
  params.validate();
  if (omega0.truncation() != params.N)
  {
    throw std::invalid_argument("simulate_coupled: initial field truncation mismatch");
  }
  if (!omega0.is_conjugate_symmetric())
  {
    throw std::invalid_argument("simulate_coupled: initial field is not conjugate symmetric");
  }
  detail::check_noise(params, noise);

  ExponentialIntegrator const integrator(params);
  ModeField const             zero(params.N);
  auto const                  total = params.steps();

  CoupledPath cp{detail::empty_record(params), detail::empty_record(params),
                 detail::empty_record(params)};
  ModeField omega = omega0;
  ModeField z     = omega0;
  ModeField drift = nonlinearity(omega);

  auto save = [&](std::size_t step) {
    double const t = static_cast<double>(step) * params.dt;
    cp.omega.times.push_back(t);
    cp.z.times.push_back(t);
    cp.rho.times.push_back(t);
    cp.omega.states.push_back(omega);
    cp.z.states.push_back(z);
    cp.rho.states.push_back(omega - z);
    if (options.keep_nonlinear)
    {
      cp.omega.nonlinear.push_back(drift);
    }
  };

  save(0);
  for (std::size_t n = 0; n < total; ++n)
  {
    omega = integrator.step(omega, drift, noise[n]);
    z     = integrator.step(z, zero, noise[n]);
    auto const norm = norm_l2(omega);
    if (!(norm <= params.blowup_guard))
    {
      throw BlowUpError(n + 1, static_cast<double>(n + 1) * params.dt, norm);
    }
    drift = nonlinearity(omega);
    if (detail::is_saved_step(n + 1, total, params.save_every))
    {
      save(n + 1);
    }
  }
  cp.omega.noise = std::move(noise);
  cp.z.noise     = cp.omega.noise;
  return cp;
}

/// Coupled run driven by trajectory `trajectory` of the master seed.
inline CoupledPath simulate_coupled(ModeField const &omega0, SimParams const &params,
                                    std::uint64_t trajectory = 0,
                                    SimulationOptions const &options = {})
{
  params.validate();
  NoiseStream stream(params.seed, trajectory, params.N);
  return simulate_coupled(omega0, params, sample_noise_path(stream, params.dt, params.steps()),
                          options);
}

/// OU path alone from z0 on trajectory `trajectory`; noise is stored.
inline PathRecord simulate_ou(ModeField const &z0, SimParams const &params, std::uint64_t trajectory = 0)
{
  params.validate();
  if (z0.truncation() != params.N)
  {
    throw std::invalid_argument("simulate_ou: initial field truncation mismatch");
  }
  ExponentialIntegrator const integrator(params);
  ModeField const             zero(params.N);
  NoiseStream                 stream(params.seed, trajectory, params.N);
  auto const                  total = params.steps();
  PathRecord                  out   = detail::empty_record(params);
  out.noise                         = sample_noise_path(stream, params.dt, total);
  ModeField z                       = z0;
  out.times.push_back(0.0);
  out.states.push_back(z);
  for (std::size_t n = 0; n < total; ++n)
  {
    z = integrator.step(z, zero, out.noise[n]);
    if (detail::is_saved_step(n + 1, total, params.save_every))
    {
      out.times.push_back(static_cast<double>(n + 1) * params.dt);
      out.states.push_back(z);
    }
  }
  return out;
}

/**
 * Runs SNS and OU on trajectory `trajectory` without storing anything and
 * calls observe(step, t, omega, z) after every step (and once at step 0).
 * For long runs where only running statistics are needed.
 */
template <class Observer>
void simulate_streaming(ModeField const &omega0, ModeField const &z0, SimParams const &params,
                        std::uint64_t trajectory, Observer &&observe)
{
  params.validate();
  if (omega0.truncation() != params.N || z0.truncation() != params.N)
  {
    throw std::invalid_argument("simulate_streaming: initial field truncation mismatch");
  }
  ExponentialIntegrator const integrator(params);
  ModeField const             zero(params.N);
  NoiseStream                 stream(params.seed, trajectory, params.N);
  ModeField                   omega = omega0;
  ModeField                   z     = z0;
  auto const                  total = params.steps();
  observe(std::size_t{0}, 0.0, omega, z);
  for (std::size_t n = 0; n < total; ++n)
  {
    auto const dbeta = stream.next(params.dt);
    omega            = integrator.step(omega, nonlinearity(omega), dbeta);
    z                = integrator.step(z, zero, dbeta);
    auto const norm  = norm_l2(omega);
    double const t   = static_cast<double>(n + 1) * params.dt;
    if (!(norm <= params.blowup_guard))
    {
      throw BlowUpError(n + 1, t, norm);
    }
    observe(n + 1, t, omega, z);
  }
}

/// Field at time s, linearly interpolated between saved slices.
inline ModeField interpolate(PathRecord const &path, double s)
{
  if (path.states.empty())
  {
    throw std::invalid_argument("interpolate: empty path");
  }
  auto const &ts  = path.times;
  double const eps = 1e-9 * (path.dt > 0.0 ? path.dt : 1.0);
  if (s < ts.front() - eps || s > ts.back() + eps)
  {
    throw std::out_of_range("interpolate: time outside the recorded interval");
  }
  auto const it = std::lower_bound(ts.begin(), ts.end(), s - eps);
  auto const hi = static_cast<std::size_t>(it - ts.begin());
  if (hi < ts.size() && std::abs(ts[hi] - s) <= eps)
  {
    return path.states[hi];
  }
  auto const lo = hi - 1;
  double const w = (s - ts[lo]) / (ts[hi] - ts[lo]);
  return (1.0 - w) * path.states[lo] + w * path.states[hi];
}

namespace detail {

/// F(omega(tau)), reusing the cache when tau falls on a saved slice.
inline ModeField nonlinear_at(PathRecord const &path, double tau)
{
  double const eps = 1e-9 * path.dt;
  auto const   it  = std::lower_bound(path.times.begin(), path.times.end(), tau - eps);
  if (it != path.times.end() && std::abs(*it - tau) <= eps)
  {
    auto const i = static_cast<std::size_t>(it - path.times.begin());
    return path.nonlinear.size() == path.states.size() ? path.nonlinear[i]
                                                       : nonlinearity(path.states[i]);
  }
  return nonlinearity(interpolate(path, tau));
}

inline void check_aux_time(double s, double horizon)
{
  double const eps = 1e-12 * horizon;
  if (s < -eps || s > horizon + eps)
  {
    throw std::out_of_range("auxiliary drift: time outside [0, t]");
  }
}

}  // namespace detail

/**
 * Drift of the time-reflected auxiliary process:
 *
 *   Ftilde_k(s) = 0                                       for s < t/2,
 *               = 2 e^{-nu|k|^alpha (t-s)} F_k(omega(2s-t)) for s in [t/2, t].
 */
inline ModeField auxiliary_drift_field(double s, SimParams const &params,
                                       PathRecord const &omega_path)
{
  double const t = omega_path.horizon();
  detail::check_aux_time(s, t);
  if (s < 0.5 * t)
  {
    return ModeField(params.N);
  }
  auto const f = detail::nonlinear_at(omega_path, std::min(2.0 * s - t, t));
  return ModeField::from_half(params.N, [&](WaveVector k) {
    return 2.0 * std::exp(-params.dissipation(k) * (t - s)) * f[k];
  });
}

inline complex auxiliary_drift(double s, SimParams const &params, PathRecord const &omega_path,
                               WaveVector k)
{
  double const t = omega_path.horizon();
  detail::check_aux_time(s, t);
  if (s < 0.5 * t)
  {
    return {0.0, 0.0};
  }
  return 2.0 * std::exp(-params.dissipation(k) * (t - s)) *
         detail::nonlinear_at(omega_path, std::min(2.0 * s - t, t))[k];
}

/**
 * Integrates d w~_k = [-nu|k|^alpha w~_k + Ftilde_k(s)] ds + sigma_k dbeta_k
 * on the increments stored in `omega_path`, starting from omega(0).
 * w~(t) = omega(t) in the continuum; on the grid they differ by O(dt).
 */
inline PathRecord simulate_auxiliary(PathRecord const &omega_path, SimParams const &params)
{
  params.validate();
  if (omega_path.noise.empty())
  {
    throw std::invalid_argument("simulate_auxiliary: path has no stored noise");
  }
  detail::check_noise(params, omega_path.noise);
  ExponentialIntegrator const integrator(params);
  auto const                  total = params.steps();
  PathRecord                  out   = detail::empty_record(params);
  ModeField                   state = omega_path.states.front();
  out.times.push_back(0.0);
  out.states.push_back(state);
  for (std::size_t n = 0; n < total; ++n)
  {
    double const s = static_cast<double>(n) * params.dt;
    state = integrator.step(state, auxiliary_drift_field(s, params, omega_path), omega_path.noise[n]);
    auto const norm = norm_l2(state);
    if (!(norm <= params.blowup_guard))
    {
      throw BlowUpError(n + 1, s + params.dt, norm);
    }
    if (detail::is_saved_step(n + 1, total, params.save_every))
    {
      out.times.push_back(static_cast<double>(n + 1) * params.dt);
      out.states.push_back(state);
    }
  }
  out.noise = omega_path.noise;
  return out;
}

/// Draws from the stationary OU law: independent complex Gaussians with
/// E|z_k|^2 = sigma_k^2 / (2 nu |k|^alpha).
inline ModeField sample_stationary_ou(SimParams const &params, std::uint64_t key, std::uint32_t tag = 0)
{
  return ModeField::from_half(params.N, [&](WaveVector k) {
    double const var = std::pow(params.forcing.sigma(k), 2) / (2.0 * params.dissipation(k));
    auto const   g   = normal_pair(key, mode_code(k), tag, 0x5EED5EEDu, 0);
    double const s   = std::sqrt(0.5 * var);
    return complex{s * g.first, s * g.second};
  });
}

}  // namespace smallscale
