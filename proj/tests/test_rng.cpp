#include "domsde/rng.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <set>

using namespace domsde;

// Known-answer vectors for Philox4x64-10 (the reference suite's vectors, reproduced with numpy's Philox).
TEST(Philox, KnownAnswerZero)
{
    const auto out = Philox4x64::block({0, 0, 0, 0}, {0, 0});
    EXPECT_EQ(out[0], 0x16554d9eca36314cULL);
    EXPECT_EQ(out[1], 0xdb20fe9d672d0fdcULL);
    EXPECT_EQ(out[2], 0xd7e772cee186176bULL);
    EXPECT_EQ(out[3], 0x7e68b68aec7ba23bULL);
}

TEST(Philox, KnownAnswerAllOnes)
{
    const std::uint64_t f = ~0ULL;
    const auto out = Philox4x64::block({f, f, f, f}, {f, f});
    EXPECT_EQ(out[0], 0x87b092c3013fe90bULL);
    EXPECT_EQ(out[1], 0x438c3c67be8d0224ULL);
    EXPECT_EQ(out[2], 0x9cc7d7c69cd777b6ULL);
    EXPECT_EQ(out[3], 0xa09caebf594f0ba0ULL);
}

TEST(Philox, KnownAnswerPi)
{
    const auto out = Philox4x64::block({0x243f6a8885a308d3ULL, 0x13198a2e03707344ULL, 0xa4093822299f31d0ULL,
                                        0x082efa98ec4e6c89ULL},
                                       {0x452821e638d01377ULL, 0xbe5466cf34e90c6cULL});
    EXPECT_EQ(out[0], 0xa528f45403e61d95ULL);
    EXPECT_EQ(out[1], 0x38c72dbd566e9788ULL);
    EXPECT_EQ(out[2], 0xa5a1610e72fd18b5ULL);
    EXPECT_EQ(out[3], 0x57bd43b5e52b7fe6ULL);
}

TEST(Philox, KnownAnswerMixed)
{
    const auto out = Philox4x64::block({5, 0, 7, 0}, {123456789, 42});
    EXPECT_EQ(out[0], 0xe2705852bfed0371ULL);
    EXPECT_EQ(out[1], 0x8ebbdb5c53e7c2ddULL);
    EXPECT_EQ(out[2], 0x536132abbb7a65cfULL);
    EXPECT_EQ(out[3], 0x8b955c233051e11dULL);
}

TEST(Philox, EngineEmitsBlocksInCounterOrder)
{
    Philox4x64 eng({7, 9});
    for (std::uint64_t c = 0; c < 3; ++c)
    {
        const auto block = Philox4x64::block({c, 0, 0, 0}, {7, 9});
        for (int i = 0; i < 4; ++i)
            EXPECT_EQ(eng(), block[static_cast<std::size_t>(i)]);
    }
    EXPECT_EQ(eng.consumed(), 12u);
}

TEST(Philox, CounterCarriesIntoHigherWords)
{
    const std::uint64_t f = ~0ULL;
    Philox4x64 eng({1, 2}, {f, 0, 0, 0});
    for (int i = 0; i < 4; ++i)
        eng();
    const auto next = Philox4x64::block({0, 1, 0, 0}, {1, 2});
    EXPECT_EQ(eng(), next[0]);
}

TEST(Streams, DeterministicPerSeedIndexTag)
{
    auto a = make_stream(11, 3, StreamTag::path);
    auto b = make_stream(11, 3, StreamTag::path);
    for (int i = 0; i < 100; ++i)
        ASSERT_EQ(a(), b());
}

TEST(Streams, DistinctForDistinctInputs)
{
    std::set<std::uint64_t> first;
    for (std::uint64_t seed = 0; seed < 4; ++seed)
        for (std::uint64_t index = 0; index < 4; ++index)
            for (auto tag : {StreamTag::path, StreamTag::quadrature, StreamTag::probe, StreamTag::sampling})
                first.insert(make_stream(seed, index, tag)());
    EXPECT_EQ(first.size(), 64u);
}

TEST(Gaussian, MomentsMatchStandardNormal)
{
    GaussianSource g(make_stream(2024, 0));
    const int n = 200000;
    double s = 0.0, s2 = 0.0, s4 = 0.0;
    for (int i = 0; i < n; ++i)
    {
        const double z = g();
        s += z;
        s2 += z * z;
        s4 += z * z * z * z;
    }
    const double mean = s / n, var = s2 / n - mean * mean;
    EXPECT_LT(std::abs(mean), 4.0 / std::sqrt(n));
    EXPECT_LT(std::abs(var - 1.0), 4.0 * std::sqrt(2.0 / n));
    EXPECT_LT(std::abs(s4 / n - 3.0), 4.0 * std::sqrt(96.0 / n));
}

TEST(Gaussian, UniformInUnitInterval)
{
    GaussianSource g(make_stream(5, 5));
    double s = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i)
    {
        const double u = g.uniform();
        ASSERT_GE(u, 0.0);
        ASSERT_LT(u, 1.0);
        s += u;
    }
    EXPECT_LT(std::abs(s / n - 0.5), 4.0 * std::sqrt(1.0 / (12.0 * n)));
}
