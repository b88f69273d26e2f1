#include "domsde/rng.hpp"

namespace domsde
{
    namespace
    {
        constexpr std::uint64_t kMul0 = 0xD2E7470EE14C6C93ULL;
        constexpr std::uint64_t kMul1 = 0xCA5A826395121157ULL;
        constexpr std::uint64_t kWeyl0 = 0x9E3779B97F4A7C15ULL; // golden ratio
        constexpr std::uint64_t kWeyl1 = 0xBB67AE8584CAA73BULL; // sqrt(3) - 1

        inline void mulhilo(std::uint64_t a, std::uint64_t b, std::uint64_t &hi, std::uint64_t &lo) noexcept
        {
            __extension__ using u128 = unsigned __int128;
            const u128 product = static_cast<u128>(a) * b;
            hi = static_cast<std::uint64_t>(product >> 64);
            lo = static_cast<std::uint64_t>(product);
        }
    }

    Philox4x64::Counter Philox4x64::block(Counter ctr, Key key) noexcept
    {
        for (int round = 0; round < 10; ++round)
        {
            if (round > 0)
            {
                key[0] += kWeyl0;
                key[1] += kWeyl1;
            }
            std::uint64_t hi0, lo0, hi1, lo1;
            mulhilo(kMul0, ctr[0], hi0, lo0);
            mulhilo(kMul1, ctr[2], hi1, lo1);
            ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        }
        return ctr;
    }

    void Philox4x64::increment() noexcept
    {
        for (auto &word : counter_)
        {
            if (++word != 0)
                break;
        }
    }

    Philox4x64::result_type Philox4x64::operator()() noexcept
    {
        if (buffer_pos_ == 4)
        {
            buffer_ = block(counter_, key_);
            increment();
            buffer_pos_ = 0;
        }
        ++consumed_;
        return buffer_[buffer_pos_++];
    }

    Philox4x64 make_stream(std::uint64_t seed, std::uint64_t index, StreamTag tag) noexcept
    {
        return Philox4x64({seed, index}, {0, 0, 0, static_cast<std::uint64_t>(tag)});
    }
}
