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
#include "smallscale/random.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

namespace {

using namespace smallscale;

TEST(PhiloxTest, KnownAnswers)
{
  auto const zero = Philox4x32::block({0, 0, 0, 0}, {0, 0});
  EXPECT_EQ(zero, (Philox4x32::Counter{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u}));

  auto const ones = Philox4x32::block({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
                                      {0xffffffffu, 0xffffffffu});
  EXPECT_EQ(ones, (Philox4x32::Counter{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu}));
}

TEST(NormalStreamTest, MomentsAndDeterminism)
{
  NormalStream a(42, 7);
  NormalStream b(42, 7);
  double       sum  = 0.0;
  double       sum2 = 0.0;
  int const    n    = 200000;
  for (int i = 0; i < n; ++i)
  {
    double const x = a();
    ASSERT_EQ(x, b());
    sum += x;
    sum2 += x * x;
  }
  EXPECT_NEAR(sum / n, 0.0, 4.0 / std::sqrt(n));
  EXPECT_NEAR(sum2 / n, 1.0, 4.0 * std::sqrt(2.0 / n));
}

TEST(SigmaTest, Examples)
{
  EXPECT_DOUBLE_EQ((ForcingSpectrum{1.0, 2.0}.sigma({1, 0})), 1.0);
  EXPECT_DOUBLE_EQ((ForcingSpectrum{1.0, 2.0}.sigma({3, 4})), 1.0 / 25.0);
  EXPECT_DOUBLE_EQ((ForcingSpectrum{0.5, 1.5}.sigma({2, 2})), 0.5 * std::pow(8.0, -0.75));
  EXPECT_THROW((ForcingSpectrum{}.sigma({0, 0})), std::invalid_argument);
}

TEST(EnergyInputRateTest, EnumeratedValue)
{
  // |k|^2 = 1 on four sites and 2 on four sites; sigma^2 = |k|^-20.
  EXPECT_DOUBLE_EQ(energy_input_rate({1.0, 10.0}, 1), 4.0 + 4.0 / 1024.0);
  EXPECT_EQ(energy_input_rate({0.0, 1.0}, 1), 0.0);
}

TEST(EnergyInputRateTest, NondecreasingInTruncation)
{
  ForcingSpectrum const spec{1.3, 0.7};
  double                prev = 0.0;
  for (int N = 1; N <= 12; ++N)
  {
    double const cur = energy_input_rate(spec, N);
    EXPECT_GE(cur, prev);
    prev = cur;
  }
}

TEST(SigmaMaxTest, Examples)
{
  EXPECT_EQ(sigma_max({2.0, 1.0}, 4), 2.0);
  EXPECT_EQ(sigma_max({1.0, 0.5}, 8), 1.0);
}

TEST(SigmaMaxTest, MatchesExhaustiveScan)
{
  for (double l : {0.25, 1.0, 3.0})
  {
    ForcingSpectrum const spec{0.8, l};
    double                best = 0.0;
    for (auto const k : lattice(6))
    {
      best = std::max(best, spec.sigma(k));
    }
    EXPECT_DOUBLE_EQ(sigma_max(spec, 6), best);
  }
}

TEST(IncrementTest, RejectsNonPositiveStep)
{
  NoiseStream stream(1, 0, 2);
  EXPECT_THROW(sample_increments(0.0, stream), std::invalid_argument);
  EXPECT_THROW(sample_increments(-1.0, stream), std::invalid_argument);
}

TEST(IncrementTest, ConjugateSymmetricAndDeterministic)
{
  NoiseStream a(99, 3, 4);
  NoiseStream b(99, 3, 4);
  for (int i = 0; i < 10; ++i)
  {
    auto const x = sample_increments(0.1, a);
    auto const y = sample_increments(0.1, b);
    EXPECT_EQ(x.increments, y.increments);
    EXPECT_TRUE(x.increments.is_conjugate_symmetric());
    EXPECT_EQ((x.increments[WaveVector{1, 2}]), std::conj(x.increments[WaveVector{-1, -2}]));
  }
  NoiseStream other(99, 4, 4);
  EXPECT_FALSE(sample_increments(0.1, other).increments == NoiseStream(99, 3, 4).at(0, 0.1).increments);
}

TEST(IncrementTest, UnitStepVarianceAndIndependence)
{
  NoiseStream const stream(2024, 0, 2);
  int const         n = 100000;
  double            m2 = 0.0;
  double            m4 = 0.0;
  double            cross = 0.0;
  for (int i = 0; i < n; ++i)
  {
    auto const   inc = stream.at(static_cast<std::uint64_t>(i), 1.0).increments;
    double const a2  = std::norm(inc[WaveVector{1, 0}]);
    m2 += a2;
    m4 += a2 * a2;
    cross += inc[WaveVector{1, 0}].real() * inc[WaveVector{1, 2}].real();
  }
  double const mean = m2 / n;
  double const se   = std::sqrt((m4 / n - mean * mean) / n);
  EXPECT_NEAR(mean, 1.0, 3.0 * se);
  // Each real part has variance 1/2, so the correlation is 4 * mean product.
  EXPECT_LT(std::abs(2.0 * cross / n), 4.0 / std::sqrt(n));
}

TEST(IncrementTest, ScalingInStepSize)
{
  NoiseStream const stream(5, 1, 3);
  for (std::uint64_t step = 0; step < 50; ++step)
  {
    auto const unit    = stream.at(step, 1.0).increments;
    auto const quarter = stream.at(step, 0.25).increments;
    for (auto const k : lattice(3))
    {
      EXPECT_DOUBLE_EQ(std::abs(quarter[k]), 0.5 * std::abs(unit[k]));
    }
  }
}

TEST(IncrementTest, MatchedAcrossTruncations)
{
  NoiseStream const small(17, 2, 3);
  NoiseStream const large(17, 2, 8);
  auto const        a = small.at(11, 0.01).increments;
  auto const        b = large.at(11, 0.01).increments;
  for (auto const k : lattice(3))
  {
    EXPECT_EQ(a[k], b[k]);
  }
}

TEST(IncrementTest, OrderIndependentAccess)
{
  NoiseStream seq(8, 0, 2);
  std::vector<ModeField> forward;
  for (int i = 0; i < 6; ++i)
  {
    forward.push_back(seq.next(0.5).increments);
  }
  NoiseStream const random_access(8, 0, 2);
  for (int i = 5; i >= 0; --i)
  {
    EXPECT_EQ(random_access.at(static_cast<std::uint64_t>(i), 0.5).increments,
              forward[static_cast<std::size_t>(i)]);
  }
}

TEST(CoarsenTest, SumsConsecutiveIncrements)
{
  NoiseStream stream(3, 0, 2);
  auto const  fine   = sample_noise_path(stream, 0.25, 8);
  auto const  coarse = coarsen(fine, 4);
  ASSERT_EQ(coarse.size(), 2u);
  EXPECT_DOUBLE_EQ(coarse[0].dt, 1.0);
  auto expected = fine[4].increments;
  expected += fine[5].increments;
  expected += fine[6].increments;
  expected += fine[7].increments;
  EXPECT_EQ(coarse[1].increments, expected);
  EXPECT_THROW(coarsen(fine, 3), std::invalid_argument);
}

}  // namespace
