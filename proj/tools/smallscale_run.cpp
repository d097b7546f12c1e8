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

// Command-line front end.
//
//   smallscale_run <simulate|compare|girsanov|estimates|stationary>
//       [--config PATH] [--seed INT] [--ensemble INT] [--out DIR]
//       [--format json|csv] [--save-every INT] [--dump-noise] [--check]
//       [--threads INT] [--set key=value ...]
//
// Exit codes: 0 success, 2 invalid configuration, 3 blow-up guard hit,
// 4 experiment check failed (only with --check), 1 anything else.

#include "smallscale/runner.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

struct Flags
{
  std::string                  config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t>   ensemble;
  std::optional<std::string>   out;
  std::optional<std::string>   format;
  std::optional<int>           save_every;
  std::optional<unsigned>      threads;
  bool                         dump_noise{false};
  bool                         check{false};
  std::vector<std::string>     set;
};

std::string read_file(std::string const &path)
{
  std::ifstream in(path);
  if (!in)
  {
    throw smallscale::ConfigError({"cannot read config file '" + path + "'"});
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run(std::string const &experiment, Flags const &f)
{
  std::string text;
  try
  {
    text = f.config_path.empty() ? std::string() : read_file(f.config_path);
  }
  catch (smallscale::ConfigError const &e)
  {
    std::cerr << e.what() << "\n";
    return 2;
  }
  text += "\nexperiment = " + experiment + "\n";
  if (f.seed)
  {
    text += "seed = " + std::to_string(*f.seed) + "\n";
  }
  if (f.ensemble)
  {
    text += "ensemble = " + std::to_string(*f.ensemble) + "\n";
  }
  if (f.out)
  {
    text += "output_dir = " + *f.out + "\n";
  }
  if (f.format)
  {
    text += "format = " + *f.format + "\n";
  }
  if (f.save_every)
  {
    text += "save_stride = " + std::to_string(*f.save_every) + "\n";
  }
  if (f.threads)
  {
    text += "threads = " + std::to_string(*f.threads) + "\n";
  }
  if (f.dump_noise)
  {
    text += "dump_noise = true\n";
  }
  for (auto const &kv : f.set)
  {
    text += kv + "\n";
  }

  smallscale::RunConfig cfg;
  try
  {
    cfg = smallscale::parse_config(text);
  }
  catch (smallscale::ConfigError const &e)
  {
    std::cerr << e.what() << "\n";
    return 2;
  }

  smallscale::RunManifest manifest;
  try
  {
    manifest = smallscale::run_experiment(cfg);
  }
  catch (smallscale::BlowUpError const &e)
  {
    std::cerr << "numerical abort: " << e.what() << "\n";
    return 3;
  }
  std::cout << smallscale::report(manifest);
  if (!manifest.blowups.empty())
  {
    return 3;
  }
  if (f.check && !manifest.check_passed)
  {
    return 4;
  }
  return 0;
}

}  // namespace

int main(int argc, char **argv)
{
  CLI::App app{"Stochastic Navier-Stokes small-scale experiments"};
  app.require_subcommand(1);
  app.footer("Config keys (key = default):\n" + smallscale::config_help());

  Flags       flags;
  std::string chosen;
  char const *names[] = {"simulate", "compare", "girsanov", "estimates", "stationary"};
  char const *help[]  = {"coupled SNS / OU paths", "weak-convergence, autocovariance and KS tables",
                         "likelihood ratios, Novikov integrals, relative entropy",
                         "constants, coupled-difference bound, A2 exit frequency",
                         "long-run time averages from two starts"};
  for (int i = 0; i < 5; ++i)
  {
    auto *sub = app.add_subcommand(names[i], help[i]);
    sub->add_option("--config", flags.config_path, "key = value config file");
    sub->add_option("--seed", flags.seed, "master seed");
    sub->add_option("--ensemble", flags.ensemble, "number of trajectories");
    sub->add_option("--out", flags.out, "output directory");
    sub->add_option("--format", flags.format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
    sub->add_option("--save-every", flags.save_every, "stride of written path slices");
    sub->add_option("--threads", flags.threads, "worker threads (0: all cores)");
    sub->add_flag("--dump-noise", flags.dump_noise, "write Brownian increments");
    sub->add_flag("--check", flags.check, "exit 4 when the experiment's check fails");
    sub->add_option("--set", flags.set, "extra key=value overrides");
    sub->callback([&chosen, name = std::string(names[i])] { chosen = name; });
  }

  try
  {
    app.parse(argc, argv);
  }
  catch (CLI::ParseError const &e)
  {
    int const code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try
  {
    return run(chosen, flags);
  }
  catch (std::exception const &e)
  {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
