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

// Run configuration: a flat "key = value" document, '#' starts a comment,
// later assignments override earlier ones. Unknown keys are errors.

#include "smallscale/dynamics.hpp"
#include "smallscale/estimates.hpp"
#include "smallscale/forcing.hpp"
#include "smallscale/girsanov.hpp"
#include "smallscale/statistics.hpp"

#include <cstdio>
#include <cstdlib>
#include <functional>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace smallscale {

enum class Experiment
{
  simulate,
  compare,
  girsanov,
  estimates,
  stationary
};

enum class OutputFormat
{
  json,
  csv
};

enum class InitialCondition
{
  zero,        // omega(0) = 0
  decay,       // |omega_k(0)| = D |k|^-r / 2, random phases
  stationary,  // omega(0) drawn from the stationary OU law
};

struct RunConfig
{
  Experiment       experiment{Experiment::simulate};
  SimParams        sim{};
  TrapParams       trap{};
  std::size_t      ensemble_size{1};
  int              save_stride{100};
  std::string      output_dir{"out"};
  OutputFormat     format{OutputFormat::json};
  bool             dump_noise{false};
  unsigned         threads{0};  // 0: hardware concurrency

  InitialCondition initial{InitialCondition::zero};
  double           initial_D{1.0};
  double           initial_r{2.0};

  DriftDifference         girsanov_mode{DriftDifference::auxiliary};
  double                  gamma{std::numeric_limits<double>::quiet_NaN()};  // NaN: middle of the window
  double                  novikov_eps{0.0};
  std::vector<double>     stop_N{10.0, 20.0, 40.0};

  std::vector<WaveVector> modes{{2, 0}, {4, 0}, {8, 0}};
  std::string             functional{"sup_norm_clamp"};
  double                  functional_bound{5.0};
  std::size_t             lag_max_steps{200};
  std::size_t             lag_stride_steps{10};
  double                  burn_in_t{0.0};

  int                     probe{64};

  double                  stationary_amplitude{10.0};
  std::size_t             observe_stride{10};
  std::size_t             batches{20};

  /// Stopping exponent actually used by the girsanov experiment.
  double effective_gamma() const
  {
    if (gamma == gamma)
    {
      return gamma;
    }
    double const l = sim.forcing.decay;
    return l + 1.0 + 0.25 * (sim.alpha - 2.0);
  }
};

/// Every violated constraint, one per line in what().
class ConfigError : public std::invalid_argument
{
public:
  explicit ConfigError(std::vector<std::string> errors)
    : std::invalid_argument(join(errors))
    , errors_(std::move(errors))
  {}

  std::vector<std::string> const &errors() const noexcept
  {
    return errors_;
  }

private:
  static std::string join(std::vector<std::string> const &errors)
  {
    std::string out = "invalid configuration:";
    for (auto const &e : errors)
    {
      out += "\n  - " + e;
    }
    return out;
  }

  std::vector<std::string> errors_;
};

namespace detail {

inline std::string trim(std::string_view s)
{
  auto const b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos)
  {
    return {};
  }
  auto const e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::string format_double(double x)
{
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline double parse_double(std::string const &v)
{
  char        *end = nullptr;
  double const x   = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size())
  {
    throw std::invalid_argument("not a number: '" + v + "'");
  }
  return x;
}

inline long long parse_int(std::string const &v)
{
  char          *end = nullptr;
  long long const x  = std::strtoll(v.c_str(), &end, 10);
  if (v.empty() || end != v.c_str() + v.size())
  {
    throw std::invalid_argument("not an integer: '" + v + "'");
  }
  return x;
}

inline std::size_t parse_count(std::string const &v)
{
  auto const x = parse_int(v);
  if (x < 0)
  {
    throw std::invalid_argument("must be >= 0: '" + v + "'");
  }
  return static_cast<std::size_t>(x);
}

inline std::vector<std::string> split(std::string const &v, char sep)
{
  std::vector<std::string> out;
  std::stringstream        ss(v);
  std::string              item;
  while (std::getline(ss, item, sep))
  {
    auto t = trim(item);
    if (!t.empty())
    {
      out.push_back(std::move(t));
    }
  }
  return out;
}

inline bool parse_bool(std::string const &v)
{
  if (v == "true" || v == "1" || v == "yes")
  {
    return true;
  }
  if (v == "false" || v == "0" || v == "no")
  {
    return false;
  }
  throw std::invalid_argument("not a boolean: '" + v + "'");
}

template <class Enum>
struct EnumName
{
  Enum             value;
  std::string_view name;
};

template <class Enum, std::size_t M>
Enum parse_enum(std::string const &v, EnumName<Enum> const (&names)[M])
{
  std::string options;
  for (auto const &n : names)
  {
    if (n.name == v)
    {
      return n.value;
    }
    options += (options.empty() ? "" : ", ") + std::string(n.name);
  }
  throw std::invalid_argument("'" + v + "' is not one of " + options);
}

template <class Enum, std::size_t M>
std::string enum_name(Enum e, EnumName<Enum> const (&names)[M])
{
  for (auto const &n : names)
  {
    if (n.value == e)
    {
      return std::string(n.name);
    }
  }
  return "?";
}

inline constexpr EnumName<Experiment> kExperiments[] = {{Experiment::simulate, "simulate"},
                                                        {Experiment::compare, "compare"},
                                                        {Experiment::girsanov, "girsanov"},
                                                        {Experiment::estimates, "estimates"},
                                                        {Experiment::stationary, "stationary"}};
inline constexpr EnumName<OutputFormat> kFormats[] = {{OutputFormat::json, "json"}, {OutputFormat::csv, "csv"}};
inline constexpr EnumName<InitialCondition> kInitials[] = {{InitialCondition::zero, "zero"},
                                                           {InitialCondition::decay, "decay"},
                                                           {InitialCondition::stationary, "stationary"}};
inline constexpr EnumName<DriftDifference> kDrifts[] = {{DriftDifference::pathspace, "pathspace"},
                                                        {DriftDifference::auxiliary, "auxiliary"}};

}  // namespace detail

inline std::string experiment_name(Experiment e)
{
  return detail::enum_name(e, detail::kExperiments);
}

inline Experiment parse_experiment(std::string const &name)
{
  return detail::parse_enum(name, detail::kExperiments);
}

inline std::string format_name(OutputFormat f)
{
  return detail::enum_name(f, detail::kFormats);
}

struct ConfigKey
{
  std::string                                               key;
  std::string                                               help;
  std::function<void(RunConfig &, std::string const &)>     set;
  std::function<std::string(RunConfig const &)>             get;
};

/// The key table; also drives --help and the canonical form.
inline std::vector<ConfigKey> const &config_keys()
{
  using namespace detail;
  auto dbl = [](std::string key, std::string help, auto member) {
    return ConfigKey{std::move(key), std::move(help),
                     [member](RunConfig &c, std::string const &v) { member(c) = parse_double(v); },
                     [member](RunConfig const &c) { return format_double(member(const_cast<RunConfig &>(c))); }};
  };
  auto cnt = [](std::string key, std::string help, auto member) {
    return ConfigKey{std::move(key), std::move(help),
                     [member](RunConfig &c, std::string const &v) {
                       member(c) = static_cast<std::remove_reference_t<decltype(member(c))>>(parse_count(v));
                     },
                     [member](RunConfig const &c) { return std::to_string(member(const_cast<RunConfig &>(c))); }};
  };
  auto sint = [](std::string key, std::string help, auto member) {
    return ConfigKey{std::move(key), std::move(help),
                     [member](RunConfig &c, std::string const &v) { member(c) = static_cast<int>(parse_int(v)); },
                     [member](RunConfig const &c) { return std::to_string(member(const_cast<RunConfig &>(c))); }};
  };

  static std::vector<ConfigKey> const keys = {
      {"experiment", "simulate | compare | girsanov | estimates | stationary",
       [](RunConfig &c, std::string const &v) { c.experiment = parse_enum(v, kExperiments); },
       [](RunConfig const &c) { return enum_name(c.experiment, kExperiments); }},
      sint("truncation_N", "Galerkin truncation: modes with |k1|, |k2| <= N", [](RunConfig &c) -> int & { return c.sim.N; }),
      dbl("viscosity_nu", "viscosity nu > 0", [](RunConfig &c) -> double & { return c.sim.nu; }),
      dbl("dissipation_alpha", "dissipation exponent alpha >= 2", [](RunConfig &c) -> double & { return c.sim.alpha; }),
      dbl("dt", "time step", [](RunConfig &c) -> double & { return c.sim.dt; }),
      dbl("horizon_t", "final time t (integer multiple of dt)", [](RunConfig &c) -> double & { return c.sim.horizon; }),
      dbl("forcing_amplitude_K2", "sigma_k = K2 |k|^-l", [](RunConfig &c) -> double & { return c.sim.forcing.amplitude; }),
      dbl("forcing_decay_l", "sigma_k = K2 |k|^-l", [](RunConfig &c) -> double & { return c.sim.forcing.decay; }),
      {"seed", "master seed",
       [](RunConfig &c, std::string const &v) { c.sim.seed = static_cast<std::uint64_t>(parse_count(v)); },
       [](RunConfig const &c) { return std::to_string(c.sim.seed); }},
      dbl("blowup_guard_norm", "abort a trajectory when ||omega|| exceeds this", [](RunConfig &c) -> double & { return c.sim.blowup_guard; }),
      sint("save_every_steps", "keep every n-th step in memory (girsanov needs 1)", [](RunConfig &c) -> int & { return c.sim.save_every; }),
      cnt("ensemble", "number of trajectories", [](RunConfig &c) -> std::size_t & { return c.ensemble_size; }),
      sint("save_stride", "stride between written slices of simulate paths", [](RunConfig &c) -> int & { return c.save_stride; }),
      {"output_dir", "directory for outputs and manifest.json",
       [](RunConfig &c, std::string const &v) { c.output_dir = v; },
       [](RunConfig const &c) { return c.output_dir; }},
      {"format", "json | csv",
       [](RunConfig &c, std::string const &v) { c.format = parse_enum(v, kFormats); },
       [](RunConfig const &c) { return enum_name(c.format, kFormats); }},
      {"dump_noise", "write Brownian increments of simulate runs",
       [](RunConfig &c, std::string const &v) { c.dump_noise = parse_bool(v); },
       [](RunConfig const &c) { return std::string(c.dump_noise ? "true" : "false"); }},
      cnt("threads", "worker threads, 0 for all cores", [](RunConfig &c) -> unsigned & { return c.threads; }),
      {"initial", "zero | decay | stationary",
       [](RunConfig &c, std::string const &v) { c.initial = parse_enum(v, kInitials); },
       [](RunConfig const &c) { return enum_name(c.initial, kInitials); }},
      dbl("initial_D", "decay initial data: |omega_k(0)| = D |k|^-r / 2", [](RunConfig &c) -> double & { return c.initial_D; }),
      dbl("initial_r", "decay initial data exponent r", [](RunConfig &c) -> double & { return c.initial_r; }),
      {"girsanov_mode", "pathspace | auxiliary",
       [](RunConfig &c, std::string const &v) { c.girsanov_mode = parse_enum(v, kDrifts); },
       [](RunConfig const &c) { return enum_name(c.girsanov_mode, kDrifts); }},
      dbl("stop_gamma", "stopping exponent in (l+1, l+alpha/2); nan picks the middle", [](RunConfig &c) -> double & { return c.gamma; }),
      dbl("novikov_eps", "pathspace series exponent shift", [](RunConfig &c) -> double & { return c.novikov_eps; }),
      {"stop_N", "comma-separated stopping thresholds",
       [](RunConfig &c, std::string const &v) {
         c.stop_N.clear();
         for (auto const &s : split(v, ','))
         {
           c.stop_N.push_back(parse_double(s));
         }
       },
       [](RunConfig const &c) {
         std::string out;
         for (double x : c.stop_N)
         {
           out += (out.empty() ? "" : ",") + format_double(x);
         }
         return out;
       }},
      {"modes", "comma-separated k1:k2 list, sorted by |k|",
       [](RunConfig &c, std::string const &v) {
         c.modes.clear();
         for (auto const &s : split(v, ','))
         {
           auto const parts = split(s, ':');
           if (parts.size() != 2)
           {
             throw std::invalid_argument("mode '" + s + "' is not k1:k2");
           }
           c.modes.push_back({static_cast<int>(parse_int(parts[0])), static_cast<int>(parse_int(parts[1]))});
         }
       },
       [](RunConfig const &c) {
         std::string out;
         for (auto const k : c.modes)
         {
           out += (out.empty() ? "" : ",") + std::to_string(k.k1) + ":" + std::to_string(k.k2);
         }
         return out;
       }},
      {"functional", "sup_norm_clamp | terminal_clamp | running_max_clamp | windowed_mean_clamp",
       [](RunConfig &c, std::string const &v) { c.functional = v; },
       [](RunConfig const &c) { return c.functional; }},
      dbl("functional_bound_B", "clamp level of the functional", [](RunConfig &c) -> double & { return c.functional_bound; }),
      cnt("lag_max_steps", "largest autocovariance lag in steps", [](RunConfig &c) -> std::size_t & { return c.lag_max_steps; }),
      cnt("lag_stride_steps", "spacing of autocovariance lags in steps", [](RunConfig &c) -> std::size_t & { return c.lag_stride_steps; }),
      dbl("burn_in_t", "time discarded before time averages", [](RunConfig &c) -> double & { return c.burn_in_t; }),
      sint("probe", "largest |k| scanned for the nonlinearity constants", [](RunConfig &c) -> int & { return c.probe; }),
      dbl("trap_gamma", "A1 decay exponent gamma", [](RunConfig &c) -> double & { return c.trap.gamma; }),
      dbl("trap_D", "A1 level D", [](RunConfig &c) -> double & { return c.trap.D; }),
      dbl("trap_E", "A2 level E", [](RunConfig &c) -> double & { return c.trap.E; }),
      dbl("trap_eta", "A2 slack eta > 1", [](RunConfig &c) -> double & { return c.trap.eta; }),
      dbl("trap_alpha_prime", "alpha' in (1, alpha]", [](RunConfig &c) -> double & { return c.trap.alpha_prime; }),
      dbl("stationary_amplitude", "second start of the stationary runs: A |k|^-2", [](RunConfig &c) -> double & { return c.stationary_amplitude; }),
      cnt("observe_stride", "steps between recorded observables", [](RunConfig &c) -> std::size_t & { return c.observe_stride; }),
      cnt("batches", "batch count for batch-means errors", [](RunConfig &c) -> std::size_t & { return c.batches; }),
  };
  return keys;
}

/// Every violated constraint of `c`.
inline std::vector<std::string> config_violations(RunConfig const &c)
{
  std::vector<std::string> e;
  auto const              &s = c.sim;
  if (!(s.nu > 0.0))
  {
    e.emplace_back("viscosity_nu > 0 required");
  }
  if (!(s.alpha >= 2.0))
  {
    e.emplace_back("alpha >= 2 required (dissipation_alpha)");
  }
  if (s.N < 1)
  {
    e.emplace_back("truncation_N >= 1 required");
  }
  bool const time_ok = s.dt > 0.0 && s.dt < s.horizon;
  if (!time_ok)
  {
    e.emplace_back("0 < dt < horizon_t required");
  }
  else if (std::abs(static_cast<double>(s.steps()) * s.dt - s.horizon) > 1e-9 * s.horizon)
  {
    e.emplace_back("horizon_t must be an integer multiple of dt");
  }
  if (!(s.forcing.amplitude >= 0.0))
  {
    e.emplace_back("forcing_amplitude_K2 >= 0 required");
  }
  if (!(s.blowup_guard > 0.0))
  {
    e.emplace_back("blowup_guard_norm > 0 required");
  }
  if (s.save_every < 1)
  {
    e.emplace_back("save_every_steps >= 1 required");
  }
  if (c.save_stride < 1)
  {
    e.emplace_back("save_stride >= 1 required");
  }
  if (c.output_dir.empty())
  {
    e.emplace_back("output_dir must be set");
  }
  if (c.initial == InitialCondition::decay && !(c.initial_D > 0.0 && c.initial_r > 0.0))
  {
    e.emplace_back("initial = decay needs initial_D > 0 and initial_r > 0");
  }
  if (c.initial == InitialCondition::stationary && !(s.forcing.amplitude > 0.0))
  {
    e.emplace_back("initial = stationary needs forcing_amplitude_K2 > 0");
  }

  bool const needs_forcing = c.experiment == Experiment::compare || c.experiment == Experiment::girsanov ||
                             c.experiment == Experiment::stationary;
  if (needs_forcing && !(s.forcing.amplitude > 0.0))
  {
    e.emplace_back(experiment_name(c.experiment) + " requires every mode forced (forcing_amplitude_K2 > 0)");
  }

  if (c.experiment == Experiment::compare)
  {
    if (c.modes.empty())
    {
      e.emplace_back("modes must list at least one wave vector");
    }
    for (std::size_t i = 0; i < c.modes.size(); ++i)
    {
      auto const k = c.modes[i];
      if (k.is_zero() || std::abs(k.k1) > s.N || std::abs(k.k2) > s.N)
      {
        e.emplace_back("mode " + std::to_string(k.k1) + ":" + std::to_string(k.k2) + " is zero or outside the truncation");
      }
      if (i > 0 && k.norm() < c.modes[i - 1].norm())
      {
        e.emplace_back("modes must be sorted by |k|");
      }
    }
    try
    {
      functionals::by_name(c.functional, c.functional_bound, s.horizon);
    }
    catch (std::invalid_argument const &ex)
    {
      e.emplace_back(ex.what());
    }
    if (!(c.functional_bound > 0.0))
    {
      e.emplace_back("functional_bound_B > 0 required");
    }
    if (c.lag_stride_steps < 1)
    {
      e.emplace_back("lag_stride_steps >= 1 required");
    }
    else if (s.save_every >= 1 && c.lag_stride_steps % static_cast<std::size_t>(s.save_every) != 0)
    {
      e.emplace_back("lag_stride_steps must be a multiple of save_every_steps");
    }
    if (time_ok && !(c.burn_in_t >= 0.0 && c.burn_in_t < s.horizon))
    {
      e.emplace_back("0 <= burn_in_t < horizon_t required");
    }
    if (time_ok && s.save_every >= 1 &&
        c.lag_max_steps >= static_cast<std::size_t>((s.horizon - c.burn_in_t) / (s.dt * s.save_every)))
    {
      e.emplace_back("lag_max_steps must be shorter than the post-burn-in segment (in saved slices)");
    }
  }

  if (c.experiment == Experiment::girsanov)
  {
    double const g = c.effective_gamma();
    double const l = s.forcing.decay;
    if (!(g > l + 1.0 && g < l + 0.5 * s.alpha))
    {
      e.emplace_back("stop_gamma = " + detail::format_double(g) + " lies outside the window (l + 1, l + alpha/2) = (" +
                     detail::format_double(l + 1.0) + ", " + detail::format_double(l + 0.5 * s.alpha) +
                     ") required by the auxiliary-process construction");
    }
    if (s.save_every != 1)
    {
      e.emplace_back("girsanov needs save_every_steps = 1");
    }
    if (c.stop_N.empty())
    {
      e.emplace_back("stop_N must list at least one threshold");
    }
    for (double x : c.stop_N)
    {
      if (!(x > 0.0))
      {
        e.emplace_back("stop_N thresholds must be > 0");
        break;
      }
    }
  }

  if (c.experiment == Experiment::estimates)
  {
    try
    {
      c.trap.validate(s.alpha);
    }
    catch (std::invalid_argument const &ex)
    {
      e.emplace_back(ex.what());
    }
    if (c.probe < 4)
    {
      e.emplace_back("probe >= 4 required");
    }
    if (s.N >= 1 && time_ok)
    {
      double const E1 = energy_input_rate(s.forcing, s.N);
      if (!((c.trap.eta - 1.0) * c.trap.E > E1 * s.horizon))
      {
        e.emplace_back("(trap_eta - 1) trap_E > E1 t required for the A2 exit bound (E1 = " +
                       detail::format_double(E1) + ")");
      }
    }
    if (s.save_every != 1)
    {
      e.emplace_back("estimates needs save_every_steps = 1");
    }
  }

  if (c.experiment == Experiment::stationary)
  {
    if (time_ok && !(c.burn_in_t >= 0.0 && c.burn_in_t < s.horizon))
    {
      e.emplace_back("0 <= burn_in_t < horizon_t required");
    }
    if (c.observe_stride < 1)
    {
      e.emplace_back("observe_stride >= 1 required");
    }
    if (c.batches < 2)
    {
      e.emplace_back("batches >= 2 required");
    }
    else if (time_ok && c.observe_stride >= 1)
    {
      double const samples = (s.horizon - c.burn_in_t) / (s.dt * static_cast<double>(c.observe_stride));
      if (samples < 10.0 * static_cast<double>(c.batches))
      {
        e.emplace_back("too few post-burn-in samples for batch means (need 10 per batch)");
      }
    }
  }
  return e;
}

/// Parses and validates; throws ConfigError listing every problem.
inline RunConfig parse_config(std::string_view text, RunConfig base = {})
{
  std::vector<std::string> errors;
  auto const              &keys = config_keys();
  std::istringstream       in{std::string(text)};
  std::string              line;
  int                      lineno = 0;
  while (std::getline(in, line))
  {
    ++lineno;
    if (auto const hash = line.find('#'); hash != std::string::npos)
    {
      line.erase(hash);
    }
    auto const body = detail::trim(line);
    if (body.empty())
    {
      continue;
    }
    auto const eq = body.find('=');
    if (eq == std::string::npos)
    {
      errors.push_back("line " + std::to_string(lineno) + ": expected key = value");
      continue;
    }
    auto const key   = detail::trim(std::string_view(body).substr(0, eq));
    auto const value = detail::trim(std::string_view(body).substr(eq + 1));
    auto const it    = std::find_if(keys.begin(), keys.end(), [&](auto const &k) { return k.key == key; });
    if (it == keys.end())
    {
      errors.push_back("line " + std::to_string(lineno) + ": unknown key '" + key + "'");
      continue;
    }
    try
    {
      it->set(base, value);
    }
    catch (std::exception const &ex)
    {
      errors.push_back("line " + std::to_string(lineno) + ": " + key + ": " + ex.what());
    }
  }
  if (errors.empty())
  {
    errors = config_violations(base);
  }
  if (!errors.empty())
  {
    throw ConfigError(std::move(errors));
  }
  return base;
}

/// Sorted key = value form; the config hash is computed over it.
inline std::string canonical_config(RunConfig const &c)
{
  std::vector<std::string> lines;
  for (auto const &k : config_keys())
  {
    if (k.key == "threads" || k.key == "output_dir")
    {
      continue;  // does not affect output bytes
    }
    lines.push_back(k.key + " = " + k.get(c));
  }
  std::sort(lines.begin(), lines.end());
  std::string out;
  for (auto const &l : lines)
  {
    out += l + "\n";
  }
  return out;
}

/// Key table with defaults, for --help.
inline std::string config_help()
{
  RunConfig const d;
  std::string     out;
  for (auto const &k : config_keys())
  {
    out += "  " + k.key + " = " + k.get(d) + "\n      " + k.help + "\n";
  }
  return out;
}

}  // namespace smallscale
