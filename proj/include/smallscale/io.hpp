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

// JSON persistence for fields and paths.
//
//   ModeField:  {"N": int, "modes": [[k1, k2, re, im], ...]}
//               upper half only (k1 > 0, or k1 == 0 and k2 > 0); the other
//               half is the conjugate and is rebuilt on load.
//   PathRecord: JSON lines, one {"t": real, "field": ModeField} per slice.
//   Noise dump: JSON lines, one {"t": real, "dt": real, "field": ModeField}
//               per increment, t being the left end of the step.

#include "smallscale/dynamics.hpp"
#include "smallscale/lattice.hpp"

#include <json.hpp>

#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

namespace smallscale {

inline nlohmann::json to_json(ModeField const &f)
{
  nlohmann::json modes = nlohmann::json::array();
  for (std::size_t i = f.centre() + 1; i < f.size(); ++i)
  {
    auto const k = f.wave_vector(i);
    auto const v = f.at_index(i);
    modes.push_back({k.k1, k.k2, v.real(), v.imag()});
  }
  return {{"N", f.truncation()}, {"modes", std::move(modes)}};
}

inline ModeField mode_field_from_json(nlohmann::json const &j)
{
  if (!j.is_object() || !j.contains("N") || !j.contains("modes"))
  {
    throw std::invalid_argument("ModeField JSON: expected an object with \"N\" and \"modes\"");
  }
  ModeField f(j.at("N").get<int>());
  for (auto const &entry : j.at("modes"))
  {
    if (!entry.is_array() || entry.size() != 4)
    {
      throw std::invalid_argument("ModeField JSON: each mode must be [k1, k2, re, im]");
    }
    WaveVector const k{entry[0].get<int>(), entry[1].get<int>()};
    if (!(k.k1 > 0 || (k.k1 == 0 && k.k2 > 0)))
    {
      throw std::invalid_argument("ModeField JSON: mode (" + std::to_string(k.k1) + "," +
                                  std::to_string(k.k2) + ") is not in the upper half lattice");
    }
    f.set(k, {entry[2].get<double>(), entry[3].get<double>()});
  }
  return f;
}

/// Writes every `stride`-th saved slice (the last one always) as JSON lines.
inline void write_path_jsonl(std::ostream &os, PathRecord const &path, int stride = 1)
{
  if (stride < 1)
  {
    throw std::invalid_argument("write_path_jsonl: stride must be >= 1");
  }
  auto const n = path.states.size();
  for (std::size_t i = 0; i < n; ++i)
  {
    if (i % static_cast<std::size_t>(stride) != 0 && i + 1 != n)
    {
      continue;
    }
    nlohmann::json line{{"t", path.times[i]}, {"field", to_json(path.states[i])}};
    os << line.dump() << '\n';
  }
}

/// Reads slices written by write_path_jsonl; the noise record stays empty.
inline PathRecord read_path_jsonl(std::istream &is)
{
  PathRecord  path;
  std::string line;
  while (std::getline(is, line))
  {
    if (line.empty())
    {
      continue;
    }
    auto const j = nlohmann::json::parse(line);
    path.times.push_back(j.at("t").get<double>());
    path.states.push_back(mode_field_from_json(j.at("field")));
  }
  if (path.times.size() > 1)
  {
    path.dt = path.times[1] - path.times[0];
  }
  return path;
}

inline void write_noise_jsonl(std::ostream &os, std::vector<NoiseIncrementSet> const &noise)
{
  double t = 0.0;
  for (auto const &inc : noise)
  {
    nlohmann::json line{{"t", t}, {"dt", inc.dt}, {"field", to_json(inc.increments)}};
    os << line.dump() << '\n';
    t += inc.dt;
  }
}

inline std::vector<NoiseIncrementSet> read_noise_jsonl(std::istream &is)
{
  std::vector<NoiseIncrementSet> out;
  std::string                    line;
  while (std::getline(is, line))
  {
    if (line.empty())
    {
      continue;
    }
    auto const j = nlohmann::json::parse(line);
    out.push_back({j.at("dt").get<double>(), mode_field_from_json(j.at("field"))});
  }
  return out;
}

}  // namespace smallscale
