#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <random>

namespace domsde
{
    /// Philox4x64-10 counter-based generator (Salmon et al., SC'11).
    ///
    /// The output of block `c` under key `k` is a pure function of (c, k), so
    /// independent streams are obtained by choosing distinct keys and no state is
    /// shared between them. Satisfies UniformRandomBitGenerator.
    class Philox4x64
    {
    public:
        using result_type = std::uint64_t;
        using Counter = std::array<std::uint64_t, 4>;
        using Key = std::array<std::uint64_t, 2>;

        Philox4x64(Key key, Counter counter = {0, 0, 0, 0}) noexcept : key_(key), counter_(counter) {}

        /// The bijection itself: ten rounds applied to `counter` under `key`.
        static Counter block(Counter counter, Key key) noexcept;

        static constexpr result_type min() noexcept { return 0; }
        static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

        result_type operator()() noexcept;

        /// Number of 64-bit words consumed so far.
        std::uint64_t consumed() const noexcept { return consumed_; }

    private:
        void increment() noexcept;

        Key key_;
        Counter counter_;
        Counter buffer_{};
        unsigned buffer_pos_ = 4;
        std::uint64_t consumed_ = 0;
    };

    /// Tags separating the purposes a (seed, index) pair can be used for.
    enum class StreamTag : std::uint64_t
    {
        path = 0,
        quadrature = 1,
        probe = 2,
        sampling = 3,
    };

    /// Independent stream for (seed, index, tag). The key carries (seed, index),
    /// the tag occupies the high counter word so block counters never collide.
    Philox4x64 make_stream(std::uint64_t seed, std::uint64_t index, StreamTag tag = StreamTag::path) noexcept;

    /// Standard normal variates drawn from a stream in a fixed order.
    class GaussianSource
    {
    public:
        explicit GaussianSource(Philox4x64 engine) : engine_(engine) {}
        double operator()() { return normal_(engine_); }
        double uniform() { return std::generate_canonical<double, 64>(engine_); }
        Philox4x64 &engine() noexcept { return engine_; }

    private:
        Philox4x64 engine_;
        std::normal_distribution<double> normal_{0.0, 1.0};
    };
}
