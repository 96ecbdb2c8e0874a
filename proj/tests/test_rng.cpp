#include <cmath>
#include <cstdint>
#include <vector>

#include <gtest/gtest.h>

#include "omem/rng.hpp"

using namespace omem;

TEST(SplitMix, KnownSequence)
{
  // Reference outputs of SplitMix64 seeded with 0 (Vigna's splitmix64.c).
  std::uint64_t state = 0;
  EXPECT_EQ(splitmix64(state), 0xe220a8397b1dcdafULL);
  EXPECT_EQ(splitmix64(state), 0x6e789e6aa1b965f4ULL);
  EXPECT_EQ(splitmix64(state), 0x06c45d188009454fULL);
}

TEST(SplitMix, DerivedSeedIsIndexedOutput)
{
  std::uint64_t state = 1234;
  for (std::uint64_t i = 0; i < 50; ++i) {
    std::uint64_t jump = 1234 + i * 0x9e3779b97f4a7c15ULL;
    const std::uint64_t expected = splitmix64(state);
    EXPECT_EQ(derive_seed(1234, i), expected);
    EXPECT_EQ(splitmix64(jump), expected);
  }
}

TEST(Noise, DeterministicPerSeed)
{
  NoiseSource a(42), b(42), c(43);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const double x = a.normal();
    EXPECT_EQ(x, b.normal());
    differs = differs || x != c.normal();
  }
  EXPECT_TRUE(differs);
}

TEST(Noise, UniformFirstDrawFromEngine)
{
  NoiseSource n(5489);
  std::mt19937_64 engine(5489);
  EXPECT_EQ(n.uniform(), static_cast<double>(engine() >> 11) * 0x1.0p-53);
}

TEST(Noise, StandardNormalMoments)
{
  NoiseSource n(7);
  const int count = 200000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < count; ++i) {
    const double z = n.normal();
    sum += z;
    sq += z * z;
  }
  const double mean = sum / count;
  EXPECT_NEAR(mean, 0.0, 5.0 / std::sqrt(count));
  EXPECT_NEAR(sq / count - mean * mean, 1.0, 0.02);
}
