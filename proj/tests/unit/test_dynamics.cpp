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

#include "smallscale/dynamics.hpp"
#include "smallscale/io.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

namespace {

using namespace smallscale;
using smallscale::testing::random_field;
using smallscale::testing::single_pair;

// Straight transcription of the convolution sum over ordered pairs.
ModeField nonlinearity_oracle(ModeField const &w)
{
  int const N = w.truncation();
  ModeField out(N);
  for (auto const k : lattice(N))
  {
    complex acc{0.0, 0.0};
    for (auto const l : lattice(N))
    {
      auto const j = k - l;
      if (j.is_zero() || !w.contains(j))
      {
        continue;
      }
      double const weight = static_cast<double>(dot(perp(l), k)) / l.norm_squared();
      acc += weight * w[l] * w[j];
    }
    if (k.k1 > 0 || (k.k1 == 0 && k.k2 > 0))
    {
      out.set(k, acc);
    }
  }
  return out;
}

double max_abs_diff(ModeField const &a, ModeField const &b)
{
  double worst = 0.0;
  for (auto const k : lattice(a.truncation()))
  {
    worst = std::max(worst, std::abs(a[k] - b[k]));
  }
  return worst;
}

SimParams small_params(int N = 4, double dt = 1e-2, double horizon = 0.2)
{
  SimParams p;
  p.nu      = 1.0;
  p.alpha   = 2.0;
  p.N       = N;
  p.dt      = dt;
  p.horizon = horizon;
  p.forcing = {0.5, 1.0};
  p.seed    = 11;
  return p;
}

TEST(NonlinearityTest, SinglePairGivesZero)
{
  for (auto const k0 : {WaveVector{1, 0}, WaveVector{2, -1}, WaveVector{3, 3}})
  {
    auto const f = nonlinearity(single_pair(4, k0, {0.7, -0.2}));
    EXPECT_EQ(norm_l2(f), 0.0);
  }
}

TEST(NonlinearityTest, TwoModeHandValue)
{
  complex const a{0.3, -1.1};
  complex const b{-0.8, 0.4};
  ModeField     w(3);
  w.set({1, 0}, a);
  w.set({1, 1}, b);
  auto const f = nonlinearity(w);
  // ordered pairs ((1,0),(1,1)) and ((1,1),(1,0)) carry weights 1 and -1/2
  auto const expected = 0.5 * a * b;
  EXPECT_NEAR(std::abs(f[WaveVector{2, 1}] - expected), 0.0, 1e-15);
}

TEST(NonlinearityTest, MatchesQuadrupleLoopOracle)
{
  for (unsigned seed = 0; seed < 5; ++seed)
  {
    auto const w = random_field(3, seed);
    EXPECT_LE(max_abs_diff(nonlinearity(w), nonlinearity_oracle(w)), 1e-13);
  }
  auto const w = random_field(6, 77, 1.0);
  EXPECT_LE(max_abs_diff(nonlinearity(w), nonlinearity_oracle(w)), 1e-13);
}

TEST(NonlinearityTest, ConservesEnstrophyAndEnergy)
{
  for (int N : {4, 8})
  {
    for (unsigned seed = 0; seed < 10; ++seed)
    {
      auto const w = random_field(N, seed);
      auto const f = nonlinearity(w);
      EXPECT_TRUE(f.is_conjugate_symmetric());
      double enstrophy = 0.0;
      double energy    = 0.0;
      for (auto const k : lattice(N))
      {
        double const r = (f[k] * std::conj(w[k])).real();
        enstrophy += r;
        energy += r / k.norm_squared();
      }
      EXPECT_LE(std::abs(enstrophy), 1e-12);
      EXPECT_LE(std::abs(energy), 1e-12);
    }
  }
}

TEST(OuStepTest, NoForcingIsExactDecay)
{
  auto p          = small_params(3, 0.05, 1.0);
  p.forcing       = {0.0, 1.0};
  auto const z0   = random_field(3, 4);
  NoiseStream stream(p.seed, 0, p.N);
  auto        z   = z0;
  for (std::size_t n = 0; n < p.steps(); ++n)
  {
    z = step_ou(z, p, stream.next(p.dt));
  }
  for (auto const k : lattice(3))
  {
    auto const expected = std::exp(-p.dissipation(k) * p.horizon) * z0[k];
    EXPECT_NEAR(std::abs(z[k] - expected), 0.0, 1e-14 * std::abs(z0[k]) + 1e-300);
  }
}

TEST(OuStepTest, SmallStepLimit)
{
  auto p        = small_params(2, 1e-7, 1.0);
  p.forcing     = {1.0, 0.0};
  auto const z0 = random_field(2, 9);
  NoiseStream const stream(3, 0, 2);
  auto const  db   = stream.at(0, p.dt);
  auto const  next = step_ou(z0, p, db);
  for (auto const k : lattice(2))
  {
    auto const euler = z0[k] + p.forcing.sigma(k) * db.increments[k];
    EXPECT_LE(std::abs(next[k] - euler), 20.0 * p.dt);
  }
}

TEST(OuStepTest, StationaryVarianceIsPreserved)
{
  SimParams p;
  p.nu      = 1.0;
  p.alpha   = 3.0;
  p.N       = 1;
  p.dt      = 0.1;
  p.horizon = 0.5;
  p.forcing = {1.0, 1.0};
  int const n = 100000;
  std::vector<double> m2(2, 0.0), m4(2, 0.0);
  WaveVector const    probes[2] = {{1, 0}, {1, 1}};
  for (int path = 0; path < n; ++path)
  {
    auto const  key = trajectory_seed(123, static_cast<std::uint64_t>(path));
    auto        z   = sample_stationary_ou(p, key);
    NoiseStream stream(123, static_cast<std::uint64_t>(path), p.N);
    for (std::size_t s = 0; s < p.steps(); ++s)
    {
      z = step_ou(z, p, stream.next(p.dt));
    }
    for (int i = 0; i < 2; ++i)
    {
      double const a2 = std::norm(z[probes[i]]);
      m2[i] += a2;
      m4[i] += a2 * a2;
    }
  }
  for (int i = 0; i < 2; ++i)
  {
    double const target = std::pow(p.forcing.sigma(probes[i]), 2) / (2.0 * p.dissipation(probes[i]));
    double const mean   = m2[i] / n;
    double const se     = std::sqrt((m4[i] / n - mean * mean) / n);
    EXPECT_NEAR(mean, target, 3.0 * se) << "mode " << i;
  }
}

TEST(SnsStepTest, ZeroDriftMatchesOuBitForBit)
{
  auto const p = small_params();
  NoiseStream const stream(1, 0, p.N);
  auto const x  = random_field(p.N, 3);
  auto const db = stream.at(0, p.dt);
  ExponentialIntegrator const integrator(p);
  EXPECT_EQ(integrator.step(x, ModeField(p.N), db), step_ou(x, p, db));
  auto const pair = single_pair(p.N, {2, 1}, {1.0, 0.5});
  EXPECT_EQ(step_sns(pair, p, db), step_ou(pair, p, db));
}

TEST(SnsStepTest, BlowUpGuardTrips)
{
  auto p         = small_params();
  p.blowup_guard = 1e-3;
  NoiseStream const stream(1, 0, p.N);
  EXPECT_THROW(step_sns(random_field(p.N, 1), p, stream.at(0, p.dt)), BlowUpError);
  EXPECT_THROW(simulate_coupled(random_field(p.N, 1), p), BlowUpError);
}

TEST(SnsStepTest, StrongRefinementOnMatchedNoise)
{
  SimParams p;
  p.nu      = 0.5;
  p.alpha   = 2.0;
  p.N       = 4;
  p.horizon = 0.5;
  p.forcing = {1.0, 1.0};
  auto const  w0 = random_field(4, 21, 1.0);
  NoiseStream stream(7, 0, 4);
  std::size_t const finest = 256;
  auto const  fine = sample_noise_path(stream, p.horizon / finest, finest);
  std::vector<ModeField> terminal;
  for (std::size_t factor : {4u, 2u, 1u})
  {
    p.dt = p.horizon / static_cast<double>(finest / factor);
    auto const cp = simulate_coupled(w0, p, coarsen(fine, factor));
    terminal.push_back(cp.omega.states.back());
  }
  double const e1 = norm_l2(terminal[0] - terminal[1]);
  double const e2 = norm_l2(terminal[1] - terminal[2]);
  EXPECT_GT(e1 / e2, 1.3);
}

TEST(CoupledTest, ZeroDataZeroForcing)
{
  auto p    = small_params();
  p.forcing = {0.0, 1.0};
  auto const cp = simulate_coupled(ModeField(p.N), p);
  for (std::size_t i = 0; i < cp.omega.states.size(); ++i)
  {
    EXPECT_EQ(norm_l2(cp.omega.states[i]), 0.0);
    EXPECT_EQ(norm_l2(cp.z.states[i]), 0.0);
    EXPECT_EQ(norm_l2(cp.rho.states[i]), 0.0);
  }
}

TEST(CoupledTest, RhoStartsAtZeroAndFirstStepIsDrift)
{
  auto const p  = small_params(4, 1e-3, 0.01);
  auto const w0 = random_field(p.N, 8);
  auto const cp = simulate_coupled(w0, p);
  EXPECT_EQ(norm_l2(cp.rho.states[0]), 0.0);
  auto const f0 = nonlinearity(w0);
  for (auto const k : lattice(p.N))
  {
    auto const expected = std::exp(-p.dissipation(k) * p.dt) * f0[k] * p.dt;
    EXPECT_NEAR(std::abs(cp.rho.states[1][k] - expected), 0.0, 1e-15);
  }
}

TEST(CoupledTest, InvariantsAlongPath)
{
  auto p         = small_params(4, 1e-2, 0.3);
  p.save_every   = 4;
  auto const w0  = random_field(p.N, 2);
  auto const cp  = simulate_coupled(w0, p);
  ASSERT_EQ(cp.omega.times.size(), 9u);  // 0, 4, ..., 28 and the final step 30
  EXPECT_DOUBLE_EQ(cp.omega.times.back(), 0.3);
  EXPECT_EQ(cp.omega.states.front(), w0);
  EXPECT_EQ(cp.omega.noise.size(), p.steps());
  for (std::size_t i = 0; i < cp.omega.states.size(); ++i)
  {
    EXPECT_TRUE(cp.omega.states[i].is_conjugate_symmetric());
    EXPECT_TRUE(cp.z.states[i].is_conjugate_symmetric());
    EXPECT_EQ(cp.rho.states[i], cp.omega.states[i] - cp.z.states[i]);
  }
}

TEST(CoupledTest, ReplayIsBitIdentical)
{
  auto const p   = small_params();
  auto const w0  = random_field(p.N, 5);
  auto const cp  = simulate_coupled(w0, p, 3);
  auto const rep = simulate_coupled(w0, p, cp.omega.noise);
  EXPECT_EQ(rep.omega.states, cp.omega.states);
  EXPECT_EQ(rep.z.states, cp.z.states);
  EXPECT_THROW(simulate_coupled(w0, p, std::vector<NoiseIncrementSet>{}), std::invalid_argument);
}

TEST(CoupledTest, RhoSolvesRandomOdeInTheLimit)
{
  auto residual = [](double dt) {
    auto const p  = small_params(4, dt, 0.08);
    auto const cp = simulate_coupled(random_field(4, 6), p, 1);
    double     worst = 0.0;
    for (std::size_t i = 0; i + 1 < cp.rho.states.size(); ++i)
    {
      auto const f = nonlinearity(cp.omega.states[i]);
      for (auto const k : lattice(4))
      {
        auto const lhs = (cp.rho.states[i + 1][k] - cp.rho.states[i][k]) / dt;
        auto const rhs = -p.dissipation(k) * cp.rho.states[i][k] + f[k];
        worst = std::max(worst, std::abs(lhs - rhs));
      }
    }
    return worst;
  };
  double const coarse = residual(4e-3);
  double const fine   = residual(1e-3);
  EXPECT_LT(fine, 0.5 * coarse);
}

TEST(SimParamsTest, Validation)
{
  auto p = small_params();
  EXPECT_NO_THROW(p.validate());
  auto bad   = p;
  bad.alpha  = 1.5;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  bad        = p;
  bad.nu     = 0.0;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  bad        = p;
  bad.dt     = 0.03;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  bad         = p;
  bad.horizon = bad.dt;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
}

class AuxiliaryTest : public ::testing::Test
{
protected:
  void SetUp() override
  {
    params_ = small_params(4, 1e-2, 0.4);
    path_   = simulate_coupled(random_field(4, 12), params_, 0, {true}).omega;
  }

  SimParams  params_;
  PathRecord path_;
};

TEST_F(AuxiliaryTest, DriftFormula)
{
  double const t = path_.horizon();
  WaveVector const k{2, 1};
  EXPECT_EQ(auxiliary_drift(0.25 * t, params_, path_, k), complex(0.0, 0.0));
  EXPECT_NEAR(std::abs(auxiliary_drift(t, params_, path_, k) -
                       2.0 * nonlinearity(path_.states.back())[k]),
              0.0, 1e-14);
  auto const mid = nonlinearity_oracle(interpolate(path_, 0.5 * t));
  auto const expected = 2.0 * std::exp(-params_.dissipation(k) * 0.25 * t) * mid[k];
  EXPECT_NEAR(std::abs(auxiliary_drift(0.75 * t, params_, path_, k) - expected), 0.0, 1e-13);
  EXPECT_THROW(auxiliary_drift(-0.1, params_, path_, k), std::out_of_range);
  EXPECT_THROW(auxiliary_drift(1.1 * t, params_, path_, k), std::out_of_range);
}

TEST_F(AuxiliaryTest, InterpolatesBetweenSlices)
{
  double const s = 0.5 * (path_.times[3] + path_.times[4]);
  auto const   w = interpolate(path_, s);
  EXPECT_LE(max_abs_diff(w, 0.5 * path_.states[3] + 0.5 * path_.states[4]), 1e-15);
}

TEST_F(AuxiliaryTest, RequiresStoredNoise)
{
  auto stripped  = path_;
  stripped.noise.clear();
  EXPECT_THROW(simulate_auxiliary(stripped, params_), std::invalid_argument);
}

TEST_F(AuxiliaryTest, MidpathDiffersFromForwardPath)
{
  auto const aux = simulate_auxiliary(path_, params_);
  auto const q   = path_.states.size() / 4;
  EXPECT_GT(norm_l2(aux.states[q] - path_.states[q]), 1e-6);
}

TEST(AuxiliaryLinearTest, NoNonlinearityGivesIdenticalPaths)
{
  auto p    = small_params(3, 1e-2, 0.2);
  p.forcing = {0.0, 1.0};
  auto const cp  = simulate_coupled(single_pair(3, {1, 2}, {0.4, 0.1}), p);
  auto const aux = simulate_auxiliary(cp.omega, p);
  EXPECT_EQ(aux.states, cp.omega.states);
  EXPECT_EQ(aux.states, cp.z.states);
}

TEST(AuxiliaryRefinementTest, TerminalCoincidenceShrinks)
{
  SimParams p;
  p.nu      = 1.0;
  p.alpha   = 2.0;
  p.N       = 4;
  p.horizon = 0.4;
  p.forcing = {0.5, 1.0};
  auto const  w0 = random_field(4, 31);
  NoiseStream stream(2, 0, 4);
  std::size_t const finest = 160;
  auto const  fine = sample_noise_path(stream, p.horizon / finest, finest);
  std::vector<double> gaps;
  for (std::size_t factor : {4u, 2u, 1u})
  {
    p.dt             = p.horizon / static_cast<double>(finest / factor);
    auto const cp    = simulate_coupled(w0, p, coarsen(fine, factor), {true});
    auto const aux   = simulate_auxiliary(cp.omega, p);
    gaps.push_back(norm_l2(aux.states.back() - cp.omega.states.back()));
  }
  EXPECT_LT(gaps[1], 0.7 * gaps[0]);
  EXPECT_LT(gaps[2], 0.7 * gaps[1]);
}

TEST(OuPathTest, MatchesCoupledOuComponent)
{
  SimParams p;
  p.N          = 4;
  p.alpha      = 3.0;
  p.dt         = 0.01;
  p.horizon    = 0.2;
  p.seed       = 17;
  p.save_every = 3;
  auto const w0 = random_field(4, 5);
  auto const cp = simulate_coupled(w0, p, 2);
  auto const ou = simulate_ou(w0, p, 2);
  EXPECT_EQ(ou.times, cp.z.times);
  EXPECT_EQ(ou.states, cp.z.states);
  ASSERT_EQ(ou.noise.size(), cp.omega.noise.size());
  EXPECT_EQ(ou.noise.back().increments, cp.omega.noise.back().increments);
  EXPECT_THROW(simulate_ou(ModeField(3), p, 0), std::invalid_argument);
}

TEST(PathJsonTest, RoundTripWithStride)
{
  auto p       = small_params(3, 1e-2, 0.1);
  auto const cp = simulate_coupled(random_field(3, 1), p);
  std::stringstream ss;
  write_path_jsonl(ss, cp.omega, 3);
  auto const back = read_path_jsonl(ss);
  ASSERT_EQ(back.states.size(), 5u);  // slices 0, 3, 6, 9 and the final 10
  EXPECT_EQ(back.states[1], cp.omega.states[3]);
  EXPECT_EQ(back.states.back(), cp.omega.states.back());
  EXPECT_DOUBLE_EQ(back.times.back(), 0.1);

  std::stringstream noise;
  write_noise_jsonl(noise, cp.omega.noise);
  auto const replay = read_noise_jsonl(noise);
  ASSERT_EQ(replay.size(), cp.omega.noise.size());
  EXPECT_EQ(replay[4].increments, cp.omega.noise[4].increments);
}

}  // namespace
