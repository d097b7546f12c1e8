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

// Experiment orchestration: ensembles over a thread pool, per-index
// results reduced in index order (so outputs do not depend on the thread
// count), tables written by the calling thread, and a manifest.

#include "smallscale/config.hpp"
#include "smallscale/estimates.hpp"
#include "smallscale/girsanov.hpp"
#include "smallscale/io.hpp"
#include "smallscale/random.hpp"
#include "smallscale/statistics.hpp"

#include <json.hpp>

#include <atomic>
#include <chrono>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace smallscale {

inline constexpr char const *kVersion = "0.1.0";

inline std::uint64_t fnv1a64(std::string_view bytes) noexcept
{
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes)
  {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t x)
{
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(x));
  return buf;
}

struct OutputFile
{
  std::string   path;  // relative to the output directory
  std::string   digest;
  std::uint64_t bytes{0};
};

struct BlowUpRecord
{
  std::size_t trajectory{0};
  std::size_t step{0};
  double      time{0.0};
  double      norm{0.0};
};

struct RunManifest
{
  std::string                config_hash;
  std::string                code_version{kVersion};
  std::string                experiment;
  std::string                config_text;
  std::string                output_dir;
  std::uint64_t              master_seed{0};
  std::vector<std::uint64_t> trajectory_seeds;
  double                     wall_clock_seconds{0.0};
  std::vector<OutputFile>    outputs;
  std::vector<BlowUpRecord>  blowups;
  nlohmann::json             summary = nlohmann::json::object();
  bool                       check_passed{true};
  std::string                check_detail;
};

inline nlohmann::json to_json(RunManifest const &m)
{
  nlohmann::json outputs = nlohmann::json::array();
  for (auto const &o : m.outputs)
  {
    outputs.push_back({{"path", o.path}, {"fnv1a64", o.digest}, {"bytes", o.bytes}});
  }
  nlohmann::json blowups = nlohmann::json::array();
  for (auto const &b : m.blowups)
  {
    blowups.push_back({{"trajectory", b.trajectory}, {"step", b.step}, {"time", b.time}, {"norm", b.norm}});
  }
  return {{"config_hash", m.config_hash},
          {"code_version", m.code_version},
          {"experiment", m.experiment},
          {"config", m.config_text},
          {"master_seed", m.master_seed},
          {"trajectory_seed_rule", "splitmix64(splitmix64(master_seed) ^ splitmix64(index + 1))"},
          {"trajectory_seeds", m.trajectory_seeds},
          {"wall_clock_seconds", m.wall_clock_seconds},
          {"outputs", outputs},
          {"blowups", blowups},
          {"summary", m.summary},
          {"check", {{"passed", m.check_passed}, {"detail", m.check_detail}}}};
}

inline RunManifest manifest_from_json(nlohmann::json const &j, std::string output_dir)
{
  RunManifest m;
  m.config_hash        = j.at("config_hash").get<std::string>();
  m.code_version       = j.at("code_version").get<std::string>();
  m.experiment         = j.at("experiment").get<std::string>();
  m.config_text        = j.at("config").get<std::string>();
  m.master_seed        = j.at("master_seed").get<std::uint64_t>();
  m.trajectory_seeds   = j.at("trajectory_seeds").get<std::vector<std::uint64_t>>();
  m.wall_clock_seconds = j.at("wall_clock_seconds").get<double>();
  for (auto const &o : j.at("outputs"))
  {
    m.outputs.push_back({o.at("path"), o.at("fnv1a64"), o.at("bytes")});
  }
  for (auto const &b : j.at("blowups"))
  {
    m.blowups.push_back({b.at("trajectory"), b.at("step"), b.at("time"), b.at("norm")});
  }
  m.summary      = j.at("summary");
  m.check_passed = j.at("check").at("passed");
  m.check_detail = j.at("check").at("detail");
  m.output_dir   = std::move(output_dir);
  return m;
}

inline RunManifest read_manifest(std::filesystem::path const &dir)
{
  std::ifstream in(dir / "manifest.json");
  if (!in)
  {
    throw std::runtime_error("missing file: " + (dir / "manifest.json").string());
  }
  return manifest_from_json(nlohmann::json::parse(in), dir.string());
}

/// Result of one trajectory: a value, or the blow-up that stopped it.
template <class T>
struct Outcome
{
  std::optional<T>            value;
  std::optional<BlowUpRecord> blowup;
};

/**
 * out[i] = f(i) for i < n on `threads` workers. Exceptions other than
 * blow-ups propagate (the first by index).
 */
template <class F>
auto parallel_map(std::size_t n, unsigned threads, F &&f)
{
  using T = decltype(f(std::size_t{0}));
  std::vector<Outcome<T>>         out(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t>        next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++)
    {
      try
      {
        out[i].value = f(i);
      }
      catch (BlowUpError const &e)
      {
        out[i].blowup = BlowUpRecord{i, e.step(), e.time(), e.norm()};
      }
      catch (...)
      {
        errors[i] = std::current_exception();
      }
    }
  };
  unsigned const workers =
      std::max(1u, std::min<unsigned>(threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : threads,
                                      static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  if (workers == 1)
  {
    work();
  }
  else
  {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w)
    {
      pool.emplace_back(work);
    }
    for (auto &t : pool)
    {
      t.join();
    }
  }
  for (auto const &e : errors)
  {
    if (e)
    {
      std::rethrow_exception(e);
    }
  }
  return out;
}

/// Column-named table written as CSV or as a JSON array of objects.
struct Table
{
  std::vector<std::string>                 columns;
  std::vector<std::vector<nlohmann::json>> rows;

  void add(std::vector<nlohmann::json> row)
  {
    rows.push_back(std::move(row));
  }

  std::string render(OutputFormat format) const
  {
    if (format == OutputFormat::json)
    {
      nlohmann::json arr = nlohmann::json::array();
      for (auto const &r : rows)
      {
        nlohmann::json obj = nlohmann::json::object();
        for (std::size_t c = 0; c < columns.size(); ++c)
        {
          obj[columns[c]] = r[c];
        }
        arr.push_back(std::move(obj));
      }
      return arr.dump(1) + "\n";
    }
    std::string out;
    for (std::size_t c = 0; c < columns.size(); ++c)
    {
      out += (c ? "," : "") + columns[c];
    }
    out += "\n";
    for (auto const &r : rows)
    {
      for (std::size_t c = 0; c < r.size(); ++c)
      {
        out += c ? "," : "";
        auto const &v = r[c];
        if (v.is_number_float())
        {
          out += detail::format_double(v.get<double>());
        }
        else if (v.is_string())
        {
          out += v.get<std::string>();
        }
        else
        {
          out += v.dump();
        }
      }
      out += "\n";
    }
    return out;
  }
};

namespace detail {

class OutputWriter
{
public:
  explicit OutputWriter(std::filesystem::path dir)
    : dir_(std::move(dir))
  {
    std::filesystem::create_directories(dir_);
  }

  void write(std::string const &relative, std::string const &content)
  {
    auto const path = dir_ / relative;
    std::filesystem::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::binary);
    os << content;
    if (!os)
    {
      throw std::runtime_error("cannot write " + path.string());
    }
    files_.push_back({relative, hex64(fnv1a64(content)), content.size()});
  }

  void table(std::string const &stem, Table const &t, OutputFormat format)
  {
    write(stem + (format == OutputFormat::json ? ".json" : ".csv"), t.render(format));
  }

  std::vector<OutputFile> const &files() const noexcept
  {
    return files_;
  }

private:
  std::filesystem::path   dir_;
  std::vector<OutputFile> files_;
};

inline std::string padded(std::size_t i)
{
  char buf[16];
  std::snprintf(buf, sizeof buf, "%06zu", i);
  return buf;
}

}  // namespace detail

/// omega(0) for trajectory j.
inline ModeField initial_field(RunConfig const &cfg, std::size_t j)
{
  auto const &s   = cfg.sim;
  auto const  key = trajectory_seed(s.seed, j);
  switch (cfg.initial)
  {
  case InitialCondition::zero:
    return ModeField(s.N);
  case InitialCondition::decay:
    return ModeField::from_half(s.N, [&](WaveVector k) {
      double const phase = 2.0 * std::numbers::pi * uniform01(key, mode_code(k), 0xD0C4u);
      return std::polar(0.5 * cfg.initial_D * std::pow(k.norm(), -cfg.initial_r), phase);
    });
  case InitialCondition::stationary:
    return sample_stationary_ou(s, key, 0);
  }
  return ModeField(s.N);
}

/// Deterministic smooth field A |k|^-2 e^{i phase(k)} used as a far start.
inline ModeField smooth_field(int N, double amplitude)
{
  return ModeField::from_half(N, [&](WaveVector k) {
    double const phase = 0.7 * k.k1 - 1.3 * k.k2;
    return std::polar(amplitude / k.norm_squared(), phase);
  });
}

namespace detail {

struct ExperimentResult
{
  nlohmann::json summary = nlohmann::json::object();
  bool           passed{true};
  std::string    detail;
};

template <class T>
std::size_t collect_blowups(std::vector<Outcome<T>> const &outcomes, RunManifest &m)
{
  std::size_t ok = 0;
  for (auto const &o : outcomes)
  {
    if (o.blowup)
    {
      m.blowups.push_back(*o.blowup);
    }
    else
    {
      ++ok;
    }
  }
  return ok;
}

inline ExperimentResult run_simulate(RunConfig const &cfg, OutputWriter &out, RunManifest &m)
{
  struct Traj
  {
    std::string omega, z, noise;
    double      terminal_enstrophy{0.0}, max_enstrophy{0.0}, terminal_rho{0.0};
  };
  auto const outcomes = parallel_map(cfg.ensemble_size, cfg.threads, [&](std::size_t j) {
    auto const         cp = simulate_coupled(initial_field(cfg, j), cfg.sim, j);
    Traj               t;
    std::ostringstream os, zs;
    write_path_jsonl(os, cp.omega, cfg.save_stride);
    write_path_jsonl(zs, cp.z, cfg.save_stride);
    t.omega = os.str();
    t.z     = zs.str();
    if (cfg.dump_noise)
    {
      std::ostringstream ns;
      write_noise_jsonl(ns, cp.omega.noise);
      t.noise = ns.str();
    }
    for (auto const &w : cp.omega.states)
    {
      t.max_enstrophy = std::max(t.max_enstrophy, std::pow(norm_l2(w), 2));
    }
    t.terminal_enstrophy = std::pow(norm_l2(cp.omega.states.back()), 2);
    t.terminal_rho       = norm_l2(cp.rho.states.back());
    return t;
  });
  collect_blowups(outcomes, m);
  Table summary{{"trajectory", "seed", "status", "terminal_enstrophy", "max_enstrophy", "terminal_rho_norm"}, {}};
  MeanAccumulator enstrophy;
  for (std::size_t j = 0; j < outcomes.size(); ++j)
  {
    auto const &o = outcomes[j];
    if (!o.value)
    {
      summary.add({j, hex64(m.trajectory_seeds[j]), "blowup", nullptr, nullptr, nullptr});
      continue;
    }
    out.write("paths/omega_" + padded(j) + ".jsonl", o.value->omega);
    out.write("paths/z_" + padded(j) + ".jsonl", o.value->z);
    if (cfg.dump_noise)
    {
      out.write("noise/noise_" + padded(j) + ".jsonl", o.value->noise);
    }
    enstrophy.add(o.value->terminal_enstrophy);
    summary.add({j, hex64(m.trajectory_seeds[j]), "ok", o.value->terminal_enstrophy, o.value->max_enstrophy,
                 o.value->terminal_rho});
  }
  out.table("trajectories", summary, cfg.format);
  ExperimentResult r;
  r.summary = {{"completed", enstrophy.n},
               {"terminal_enstrophy_mean", enstrophy.mean()},
               {"terminal_enstrophy_se", enstrophy.standard_error()}};
  r.passed  = m.blowups.empty();
  r.detail  = r.passed ? "all trajectories completed" : "blow-ups recorded";
  return r;
}

inline ExperimentResult run_compare(RunConfig const &cfg, OutputWriter &out, RunManifest &m)
{
  auto const &s = cfg.sim;
  auto const  G = functionals::by_name(cfg.functional, cfg.functional_bound, s.horizon);
  std::vector<std::size_t> lags;
  std::size_t const        per_slice = static_cast<std::size_t>(s.save_every);
  for (std::size_t l = 0; l <= cfg.lag_max_steps; l += cfg.lag_stride_steps)
  {
    lags.push_back(l / per_slice);
  }
  lags.erase(std::unique(lags.begin(), lags.end()), lags.end());
  std::size_t const burn = static_cast<std::size_t>(std::ceil(cfg.burn_in_t / (s.dt * s.save_every) - 1e-9));

  struct Traj
  {
    std::vector<double>               delta;
    std::vector<complex>              terminal;
    std::vector<std::vector<complex>> acov;
    bool                              initial_ok{true};
  };
  auto const outcomes = parallel_map(cfg.ensemble_size, cfg.threads, [&](std::size_t j) {
    auto const w0 = initial_field(cfg, j);
    auto const cp = simulate_coupled(w0, s, j);
    Traj       t;
    if (cfg.initial == InitialCondition::decay)
    {
      t.initial_ok = initial_condition_check(w0, cfg.initial_D, cfg.initial_r, s).satisfied;
    }
    for (auto const k : cfg.modes)
    {
      RescaledPath const a[] = {rescale(cp.omega, k, s)};
      RescaledPath const b[] = {rescale(cp.z, k, s)};
      t.delta.push_back(std::abs(G(a) - G(b)));
      t.terminal.push_back(a[0].samples.back());
      t.acov.push_back(autocovariance(a[0], lags, burn));
    }
    return t;
  });
  collect_blowups(outcomes, m);

  std::size_t const            nm = cfg.modes.size();
  std::vector<MeanAccumulator> delta(nm);
  std::vector<std::vector<complex>> terminal(nm), acov(nm, std::vector<complex>(lags.size()));
  std::size_t                  ok = 0, initial_violations = 0;
  for (auto const &o : outcomes)
  {
    if (!o.value)
    {
      continue;
    }
    ++ok;
    initial_violations += o.value->initial_ok ? 0 : 1;
    for (std::size_t i = 0; i < nm; ++i)
    {
      delta[i].add(o.value->delta[i]);
      terminal[i].push_back(o.value->terminal[i]);
      for (std::size_t l = 0; l < lags.size(); ++l)
      {
        acov[i][l] += o.value->acov[i][l];
      }
    }
  }

  Table weak{{"k1", "k2", "min_k", "functional", "estimate", "stderr", "n_paths"}, {}};
  Table ac{{"k1", "k2", "lag", "autocov_re", "autocov_im"}, {}};
  Table ks{{"k1", "k2", "ks_distance", "ks_stderr", "n_paths"}, {}};
  std::vector<double> est, se, ks_est, ks_se;
  for (std::size_t i = 0; i < nm; ++i)
  {
    auto const k = cfg.modes[i];
    est.push_back(delta[i].mean());
    se.push_back(delta[i].standard_error());
    weak.add({k.k1, k.k2, k.norm(), G.name, est.back(), se.back(), delta[i].n});
    for (std::size_t l = 0; l < lags.size(); ++l)
    {
      auto const v = ok ? acov[i][l] / static_cast<double>(ok) : complex{};
      ac.add({k.k1, k.k2, lags[l] * per_slice, v.real(), v.imag()});
    }
    if (terminal[i].size() >= 100)
    {
      ks_est.push_back(ks_distance_to_standard_gaussian(terminal[i]));
      ks_se.push_back(ks_bootstrap_se(terminal[i], trajectory_seed(s.seed, 0xC0FFEE + i)));
      ks.add({k.k1, k.k2, ks_est.back(), ks_se.back(), terminal[i].size()});
    }
  }
  out.table("weak_convergence", weak, cfg.format);
  out.table("autocovariance", ac, cfg.format);
  out.table("ks_terminal", ks, cfg.format);

  ExperimentResult r;
  r.summary["paths"]              = ok;
  r.summary["initial_violations"] = initial_violations;
  r.summary["functional"]         = G.name;
  nlohmann::json rows             = nlohmann::json::array();
  for (std::size_t i = 0; i < nm; ++i)
  {
    rows.push_back({{"k", {cfg.modes[i].k1, cfg.modes[i].k2}}, {"estimate", est[i]}, {"stderr", se[i]}});
  }
  r.summary["weak_convergence"] = rows;
  if (ok > 0)
  {
    auto const trend                          = decreasing_trend_test(est, se);
    r.summary["strictly_decreasing"]          = trend.strictly_decreasing;
    r.summary["nonincreasing_within_noise"]   = trend.nonincreasing_within_noise;
    r.passed                                  = trend.strictly_decreasing;
    r.detail = trend.strictly_decreasing ? "E|G(w') - G(z')| strictly decreasing in |k| at 3 SE"
                                         : "E|G(w') - G(z')| not strictly decreasing at 3 SE";
  }
  else
  {
    r.passed = cfg.ensemble_size == 0;
    r.detail = "no completed trajectories";
  }
  if (!ks_est.empty())
  {
    auto const kt                       = decreasing_trend_test(ks_est, ks_se);
    r.summary["ks_terminal"]            = ks_est;
    r.summary["ks_nonincreasing"]       = kt.nonincreasing_within_noise;
  }
  return r;
}

inline ExperimentResult run_girsanov(RunConfig const &cfg, OutputWriter &out, RunManifest &m)
{
  auto const  &s     = cfg.sim;
  double const gamma = cfg.effective_gamma();
  struct Traj
  {
    GirsanovRecord             record;
    double                     novikov{0.0};
    std::vector<EntropySample> stopped;
  };
  auto const outcomes = parallel_map(cfg.ensemble_size, cfg.threads, [&](std::size_t j) {
    auto const        cp     = simulate_coupled(initial_field(cfg, j), s, j);
    PathRecord const &source = cfg.girsanov_mode == DriftDifference::pathspace ? cp.z : cp.omega;
    auto const        series = girsanov_series(source, cfg.girsanov_mode, s);
    Traj              t;
    t.record  = series.record(series.times.size());
    t.novikov = series.novikov(series.times.size());
    t.stopped = entropy_samples(cp, cfg.girsanov_mode, s, gamma, cfg.stop_N);
    return t;
  });
  collect_blowups(outcomes, m);

  Table per{{"trajectory", "log_rn", "stochastic_integral", "quadratic_term", "novikov_integral"}, {}};
  MeanAccumulator                         unit, novikov;
  std::vector<RelativeEntropyAccumulator> entropy(cfg.stop_N.size());
  for (std::size_t j = 0; j < outcomes.size(); ++j)
  {
    auto const &o = outcomes[j];
    if (!o.value)
    {
      continue;
    }
    auto const &t = *o.value;
    per.add({j, t.record.log_rn, t.record.stochastic_integral, t.record.quadratic_term, t.novikov});
    unit.add(std::exp(t.record.log_rn));
    novikov.add(t.novikov);
    for (std::size_t i = 0; i < entropy.size(); ++i)
    {
      entropy[i].add(t.stopped[i]);
    }
  }
  out.table("girsanov_paths", per, cfg.format);

  Table ent{{"stop_N", "relative_entropy", "stderr", "novikov_mean", "novikov_stderr", "paths"}, {}};
  nlohmann::json ent_rows = nlohmann::json::array();
  for (std::size_t i = 0; i < entropy.size(); ++i)
  {
    if (entropy[i].count() == 0)
    {
      continue;
    }
    auto const rep = entropy[i].report();
    ent.add({cfg.stop_N[i], rep.estimate, rep.standard_error, rep.novikov_mean, rep.novikov_se, rep.paths});
    ent_rows.push_back({{"stop_N", cfg.stop_N[i]}, {"estimate", rep.estimate}, {"stderr", rep.standard_error}});
  }
  out.table("relative_entropy", ent, cfg.format);

  bool const   pathspace = cfg.girsanov_mode == DriftDifference::pathspace;
  auto const   series    = novikov_partial_sums(s.alpha, s.forcing.decay, pathspace ? cfg.novikov_eps : gamma,
                                                pathspace ? SeriesMode::pathspace : SeriesMode::auxiliary, 64);
  ExperimentResult r;
  r.summary = {{"mode", pathspace ? "pathspace" : "auxiliary"},
               {"gamma", gamma},
               {"paths", unit.n},
               {"mean_exp_log_rn", unit.mean()},
               {"mean_exp_log_rn_se", unit.standard_error()},
               {"novikov_mean", novikov.mean()},
               {"novikov_se", novikov.standard_error()},
               {"novikov_series_exponent", series.exponent},
               {"novikov_series", series.converging ? "converging" : "diverging"},
               {"relative_entropy", ent_rows}};
  if (unit.n > 1)
  {
    double const dev = std::abs(unit.mean() - 1.0);
    r.passed         = dev <= 3.0 * unit.standard_error();
    r.detail         = "E[exp(log_rn)] = " + format_double(unit.mean()) + " +- " + format_double(unit.standard_error());
  }
  else
  {
    r.passed = cfg.ensemble_size == 0;
    r.detail = "fewer than two completed trajectories";
  }
  return r;
}

inline ExperimentResult run_estimates(RunConfig const &cfg, OutputWriter &out, RunManifest &m)
{
  auto const &s  = cfg.sim;
  auto const  tc = derive_trap_constants(cfg.trap, s, cfg.probe);
  Table       constants{{"name", "value"}, {}};
  constants.add({"gamma", cfg.trap.gamma});
  constants.add({"M", tc.nonlinear.M});
  constants.add({"c2", tc.nonlinear.c2});
  constants.add({"Mbar", tc.nonlinear.Mbar});
  constants.add({"C_gamma", tc.nonlinear.C});
  constants.add({"K0", tc.K0});
  constants.add({"D_prime", tc.D_prime});
  constants.add({"D_bar", tc.D_bar});
  double const bound = martingale_tail_bound(cfg.trap.E, cfg.trap.eta, s.horizon, s);
  constants.add({"E1", energy_input_rate(s.forcing, s.N)});
  constants.add({"A2_exit_bound", bound});
  out.table("constants", constants, cfg.format);

  struct Traj
  {
    RhoBoundReport rho;
    bool           a2_exit{false};
  };
  auto const outcomes = parallel_map(cfg.ensemble_size, cfg.threads, [&](std::size_t j) {
    auto const cp = simulate_coupled(initial_field(cfg, j), s, j);
    return Traj{check_prop1(cp, cfg.trap, tc, s), !in_A2(cp.omega, cfg.trap.E, cfg.trap.eta).inside};
  });
  collect_blowups(outcomes, m);

  Table       per{{"trajectory", "hypotheses_met", "modes_checked", "violations", "min_margin", "a2_exit", "refusal"},
                  {}};
  std::size_t ok = 0, met = 0, violations = 0, exits = 0;
  for (std::size_t j = 0; j < outcomes.size(); ++j)
  {
    auto const &o = outcomes[j];
    if (!o.value)
    {
      continue;
    }
    auto const &t = *o.value;
    ++ok;
    exits += t.a2_exit ? 1 : 0;
    if (t.rho.hypotheses_met)
    {
      ++met;
      violations += t.rho.violations;
    }
    per.add({j, t.rho.hypotheses_met, t.rho.modes_checked, t.rho.violations,
             std::isfinite(t.rho.min_margin) ? nlohmann::json(t.rho.min_margin) : nlohmann::json(nullptr),
             t.a2_exit, t.rho.refusal});
  }
  out.table("trajectories", per, cfg.format);

  double const freq = ok ? static_cast<double>(exits) / static_cast<double>(ok) : 0.0;
  double const se   = ok ? std::sqrt(std::max(bound * (1.0 - bound), freq * (1.0 - freq)) / static_cast<double>(ok)) : 0.0;
  ExperimentResult r;
  r.summary = {{"C_gamma", tc.nonlinear.C},   {"K0", tc.K0},           {"D_bar", tc.D_bar},
               {"paths", ok},                 {"hypotheses_met", met}, {"rho_violations", violations},
               {"a2_exit_frequency", freq},   {"a2_exit_se", se},      {"a2_exit_bound", bound}};
  r.passed = violations == 0 && freq <= bound + 3.0 * se;
  r.detail = std::to_string(violations) + " rho-bound violations on " + std::to_string(met) +
             " qualifying paths; A2 exit " + format_double(freq) + " vs bound " + format_double(bound);
  return r;
}

inline ExperimentResult run_stationary(RunConfig const &cfg, OutputWriter &out, RunManifest &)
{
  auto const &s      = cfg.sim;
  auto const  starts = std::vector<ModeField>{ModeField(s.N), smooth_field(s.N, cfg.stationary_amplitude)};
  auto const  runs   = parallel_map(2, cfg.threads, [&](std::size_t j) {
    return long_run_observables(starts[j], starts[j], s, j, cfg.burn_in_t, cfg.observe_stride);
  });
  for (auto const &r : runs)
  {
    if (r.blowup)
    {
      throw BlowUpError(r.blowup->step, r.blowup->time, r.blowup->norm);
    }
  }
  auto const rep = stationary_diagnostic(runs[0].value->sns, runs[1].value->sns, runs[0].value->ou, cfg.batches);
  Table t{{"observable", "mean_from_zero", "se_from_zero", "mean_from_far", "se_from_far", "z", "agree", "ou_overlap"},
          {}};
  nlohmann::json rows = nlohmann::json::array();
  for (auto const &row : rep.rows)
  {
    t.add({row.name, row.a.mean, row.a.standard_error, row.b.mean, row.b.standard_error, row.z, row.agree,
           row.ou_overlap});
    rows.push_back({{"observable", row.name}, {"z", row.z}, {"agree", row.agree}, {"ou_overlap", row.ou_overlap}});
  }
  out.table("stationary", t, cfg.format);
  ExperimentResult r;
  r.summary = {{"rows", rows}, {"all_agree", rep.all_agree()}};
  r.passed  = rep.all_agree();
  r.detail  = r.passed ? "time averages agree within 3 SE" : "time averages disagree";
  return r;
}

}  // namespace detail

/**
 * Runs cfg.experiment, writes tables and manifest.json into
 * cfg.output_dir and returns the manifest. Blow-ups are recorded per
 * trajectory; the stationary experiment rethrows them.
 */
inline RunManifest run_experiment(RunConfig const &cfg)
{
  if (auto const v = config_violations(cfg); !v.empty())
  {
    throw ConfigError(v);
  }
  auto const  start = std::chrono::steady_clock::now();
  RunManifest m;
  m.experiment  = experiment_name(cfg.experiment);
  m.config_text = canonical_config(cfg);
  m.config_hash = hex64(fnv1a64(m.config_text));
  m.master_seed = cfg.sim.seed;
  m.output_dir  = cfg.output_dir;
  std::size_t const seeds = cfg.experiment == Experiment::stationary ? 2 : cfg.ensemble_size;
  for (std::size_t j = 0; j < seeds; ++j)
  {
    m.trajectory_seeds.push_back(trajectory_seed(cfg.sim.seed, j));
  }

  detail::OutputWriter     out(cfg.output_dir);
  detail::ExperimentResult r;
  if (cfg.ensemble_size == 0 && cfg.experiment != Experiment::stationary)
  {
    r.detail = "empty ensemble";
  }
  else
  {
    switch (cfg.experiment)
    {
    case Experiment::simulate:
      r = detail::run_simulate(cfg, out, m);
      break;
    case Experiment::compare:
      r = detail::run_compare(cfg, out, m);
      break;
    case Experiment::girsanov:
      r = detail::run_girsanov(cfg, out, m);
      break;
    case Experiment::estimates:
      r = detail::run_estimates(cfg, out, m);
      break;
    case Experiment::stationary:
      r = detail::run_stationary(cfg, out, m);
      break;
    }
  }
  m.summary      = r.summary;
  m.check_passed = r.passed;
  m.check_detail = r.detail;
  m.outputs      = out.files();
  m.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::ofstream(std::filesystem::path(cfg.output_dir) / "manifest.json") << to_json(m).dump(2) << "\n";
  return m;
}

/// Headline numbers of a manifest; names any missing output file.
inline std::string report(RunManifest const &m)
{
  std::ostringstream os;
  os << "experiment " << m.experiment << "  config " << m.config_hash << "  seed " << m.master_seed << "  version "
     << m.code_version << "\n";
  os << "trajectories " << m.trajectory_seeds.size() << "  blow-ups " << m.blowups.size() << "  wall-clock "
     << detail::format_double(m.wall_clock_seconds) << " s\n";
  for (auto const &b : m.blowups)
  {
    os << "  blow-up: trajectory " << b.trajectory << " at step " << b.step << " (t = " << b.time
       << ", |w| = " << b.norm << ")\n";
  }
  std::vector<std::string> missing;
  for (auto const &o : m.outputs)
  {
    if (!std::filesystem::exists(std::filesystem::path(m.output_dir) / o.path))
    {
      missing.push_back(o.path);
    }
  }
  for (auto const &p : missing)
  {
    os << "  missing output: " << p << "\n";
  }

  auto const &s = m.summary;
  auto        num = [](nlohmann::json const &v) { return v.is_number() ? detail::format_double(v.get<double>()) : v.dump(); };
  if (m.experiment == "estimates")
  {
    os << "  C(gamma) " << num(s.value("C_gamma", nlohmann::json())) << "  K0 " << s.value("K0", 0) << "  D_bar "
       << num(s.value("D_bar", nlohmann::json())) << "\n";
    os << "  rho bound: " << s.value("rho_violations", 0) << " violations over " << s.value("hypotheses_met", 0)
       << " qualifying paths\n";
    os << "  A2 exit: empirical " << num(s.value("a2_exit_frequency", nlohmann::json())) << " +- "
       << num(s.value("a2_exit_se", nlohmann::json())) << "  bound " << num(s.value("a2_exit_bound", nlohmann::json()))
       << "\n";
  }
  else if (m.experiment == "compare")
  {
    os << "  |k|-trend of E|G(w') - G(z')| (" << s.value("functional", std::string()) << ")\n";
    for (auto const &row : s.value("weak_convergence", nlohmann::json::array()))
    {
      os << "    k = (" << row["k"][0] << ", " << row["k"][1] << ")  " << num(row["estimate"]) << " +- "
         << num(row["stderr"]) << "\n";
    }
    os << "  isotonic criterion: " << (s.value("strictly_decreasing", false) ? "PASS" : "FAIL") << "\n";
  }
  else if (m.experiment == "girsanov")
  {
    os << "  " << s.value("mode", std::string()) << " drift: E[exp(log_rn)] = " << num(s.value("mean_exp_log_rn", nlohmann::json()))
       << " +- " << num(s.value("mean_exp_log_rn_se", nlohmann::json())) << "\n";
    os << "  Novikov mean " << num(s.value("novikov_mean", nlohmann::json())) << " +- "
       << num(s.value("novikov_se", nlohmann::json())) << "; mode series (p = "
       << num(s.value("novikov_series_exponent", nlohmann::json())) << ") " << s.value("novikov_series", std::string())
       << "\n";
    for (auto const &row : s.value("relative_entropy", nlohmann::json::array()))
    {
      os << "    stop_N " << num(row["stop_N"]) << ": H ~ " << num(row["estimate"]) << " +- " << num(row["stderr"])
         << "\n";
    }
  }
  else if (m.experiment == "stationary")
  {
    for (auto const &row : s.value("rows", nlohmann::json::array()))
    {
      os << "  " << row["observable"].get<std::string>() << ": z = " << num(row["z"]) << "  "
         << (row["agree"].get<bool>() ? "agree" : "DISAGREE") << "  OU overlap " << num(row["ou_overlap"]) << "\n";
    }
  }
  else if (m.experiment == "simulate")
  {
    os << "  completed " << s.value("completed", 0) << "  terminal enstrophy "
       << num(s.value("terminal_enstrophy_mean", nlohmann::json())) << " +- "
       << num(s.value("terminal_enstrophy_se", nlohmann::json())) << "\n";
  }
  os << "check: " << (m.check_passed ? "PASS" : "FAIL") << "  " << m.check_detail << "\n";
  return os.str();
}

}  // namespace smallscale
