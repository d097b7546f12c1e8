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

#include "smallscale/io.hpp"
#include "smallscale/lattice.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

namespace {

using namespace smallscale;
using smallscale::testing::random_field;
using smallscale::testing::single_pair;

TEST(WaveVectorTest, PerpExamples)
{
  EXPECT_EQ(perp({1, 0}), (WaveVector{0, 1}));
  EXPECT_EQ(perp({0, 1}), (WaveVector{-1, 0}));
  EXPECT_EQ(perp({2, -3}), (WaveVector{3, 2}));
  EXPECT_EQ(dot(perp({2, -3}), WaveVector{2, -3}), 0);
}

TEST(WaveVectorTest, PerpIsQuarterTurnOnLattice)
{
  for (auto const k : lattice(6))
  {
    EXPECT_EQ(perp(perp(k)), -k);
    EXPECT_EQ(dot(perp(k), k), 0);
    EXPECT_EQ(perp(k).norm_squared(), k.norm_squared());
  }
}

TEST(LatticeTest, SizesAndOrder)
{
  EXPECT_EQ(lattice(1).size(), 8u);
  EXPECT_EQ(lattice(2).size(), 24u);
  EXPECT_EQ(lattice(3).front(), (WaveVector{-3, -3}));
  EXPECT_EQ(lattice(3).back(), (WaveVector{3, 3}));
  EXPECT_THROW(lattice(0), std::invalid_argument);
}

TEST(LatticeTest, MatchesFieldIndexing)
{
  ModeField const f(5);
  auto const      ks = lattice(5);
  std::size_t     i  = 0;
  for (std::size_t slot = 0; slot < f.size(); ++slot)
  {
    if (slot == f.centre())
    {
      continue;
    }
    EXPECT_EQ(f.wave_vector(slot), ks[i]);
    EXPECT_EQ(f.index(ks[i]), slot);
    ++i;
  }
  EXPECT_EQ(i, f.mode_count());
}

TEST(ModeFieldTest, SetEnforcesConjugateSymmetry)
{
  ModeField f(3);
  f.set({1, 2}, {0.25, -1.5});
  EXPECT_EQ((f[WaveVector{-1, -2}]), std::conj(complex{0.25, -1.5}));
  EXPECT_TRUE(f.is_conjugate_symmetric());
  EXPECT_THROW(f.set({0, 0}, 1.0), std::out_of_range);
  EXPECT_THROW(f.set({4, 0}, 1.0), std::out_of_range);
}

TEST(ModeFieldTest, ArithmeticKeepsSymmetryBitExact)
{
  for (unsigned seed = 0; seed < 20; ++seed)
  {
    auto const a = random_field(4, seed);
    auto const b = random_field(4, seed + 100);
    EXPECT_TRUE((a + b).is_conjugate_symmetric());
    EXPECT_TRUE((a - b).is_conjugate_symmetric());
    EXPECT_TRUE((0.3 * a + (-1.7) * b).is_conjugate_symmetric());
  }
}

TEST(NormTest, SupGammaExamples)
{
  EXPECT_DOUBLE_EQ(norm_sup_gamma(single_pair(3, {1, 0}, 2.0), 3.0), 2.0);
  EXPECT_DOUBLE_EQ(norm_sup_gamma(single_pair(3, {0, 2}, 1.0), 2.0), 4.0);
  EXPECT_THROW(norm_sup_gamma(ModeField(2), -1.0), std::invalid_argument);
}

TEST(NormTest, SupGammaMatchesExhaustiveScan)
{
  for (unsigned seed = 0; seed < 10; ++seed)
  {
    auto const f     = random_field(4, seed);
    double     brute = 0.0;
    for (auto const k : lattice(4))
    {
      brute = std::max(brute, std::pow(std::hypot(k.k1, k.k2), 1.5) * std::abs(f[k]));
    }
    EXPECT_EQ(lattice(4).size(), 80u);
    EXPECT_DOUBLE_EQ(norm_sup_gamma(f, 1.5), brute);
  }
}

TEST(NormTest, L2Examples)
{
  EXPECT_EQ(norm_l2(ModeField(3)), 0.0);
  EXPECT_DOUBLE_EQ(norm_l2(single_pair(3, {1, 1}, 3.0)), std::sqrt(18.0));
}

TEST(NormTest, L2MatchesReverseOrderSummation)
{
  for (unsigned seed = 0; seed < 10; ++seed)
  {
    auto const  f  = random_field(8, seed);
    auto        ks = lattice(8);
    std::reverse(ks.begin(), ks.end());
    long double sum = 0.0L;
    for (auto const k : ks)
    {
      long double const re = f[k].real();
      long double const im = f[k].imag();
      sum += re * re + im * im;
    }
    double const oracle = std::sqrt(static_cast<double>(sum));
    EXPECT_NEAR(norm_l2(f), oracle, 1e-12 * oracle);
  }
}

TEST(NormTest, SupGammaMonotoneInModulus)
{
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> shrink(0.0, 1.0);
  for (unsigned seed = 0; seed < 30; ++seed)
  {
    auto const f = random_field(5, seed);
    auto const g = ModeField::from_half(5, [&](WaveVector k) { return shrink(rng) * f[k]; });
    EXPECT_LE(norm_sup_gamma(g, 2.0), norm_sup_gamma(f, 2.0));
  }
}

TEST(NormTest, L2TriangleInequality)
{
  for (unsigned seed = 0; seed < 30; ++seed)
  {
    auto const a = random_field(6, seed, 1.0);
    auto const b = random_field(6, seed + 1000, 0.5);
    EXPECT_LE(norm_l2(a + b), norm_l2(a) + norm_l2(b) + 1e-14);
  }
}

TEST(VelocityTest, SinglePairFormula)
{
  auto const u = velocity_from_vorticity(single_pair(2, {1, 0}, 1.0));
  EXPECT_EQ((u.u1[WaveVector{1, 0}]), complex(0.0, 0.0));
  EXPECT_EQ((u.u2[WaveVector{1, 0}]), complex(0.0, 1.0));
}

TEST(VelocityTest, ZeroVorticity)
{
  auto const u = velocity_from_vorticity(ModeField(3));
  EXPECT_EQ(norm_l2(u.u1), 0.0);
  EXPECT_EQ(norm_l2(u.u2), 0.0);
}

TEST(VelocityTest, DivergenceFreeAndReal)
{
  for (unsigned seed = 0; seed < 10; ++seed)
  {
    auto const w = random_field(6, seed);
    auto const u = velocity_from_vorticity(w);
    EXPECT_TRUE(u.u1.is_conjugate_symmetric());
    EXPECT_TRUE(u.u2.is_conjugate_symmetric());
    for (auto const k : lattice(6))
    {
      auto const div = static_cast<double>(k.k1) * u.u1[k] + static_cast<double>(k.k2) * u.u2[k];
      EXPECT_LE(std::abs(div), 1e-14);
    }
  }
}

TEST(ModeFieldJsonTest, HalfLatticeLayout)
{
  auto const j = to_json(single_pair(1, {0, 1}, {1.0, 2.0}));
  EXPECT_EQ(j.at("N").get<int>(), 1);
  ASSERT_EQ(j.at("modes").size(), 4u);
  for (auto const &m : j.at("modes"))
  {
    int const k1 = m[0].get<int>();
    int const k2 = m[1].get<int>();
    EXPECT_TRUE(k1 > 0 || (k1 == 0 && k2 > 0));
  }
  EXPECT_THROW(mode_field_from_json(nlohmann::json{{"N", 1}, {"modes", {{-1, 0, 1.0, 0.0}}}}),
               std::invalid_argument);
}

TEST(ModeFieldJsonTest, RoundTripIsExactOnRandomFields)
{
  for (unsigned seed = 0; seed < 5; ++seed)
  {
    auto const f    = random_field(1 + static_cast<int>(seed), seed, 1.3);
    auto const text = to_json(f).dump();
    EXPECT_EQ(mode_field_from_json(nlohmann::json::parse(text)), f);
  }
}

}  // namespace
