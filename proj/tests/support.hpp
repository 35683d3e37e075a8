#pragma once

#include "sda/core/overlay_addr.hpp"

#include <cstdint>

namespace sda::test
{
    // xorshift64*, independent of the simulator's generator
    struct Gen
    {
        std::uint64_t s;

        explicit Gen(std::uint64_t seed) : s(seed ? seed : 0x2545F4914F6CDD1Dull) {}

        std::uint64_t next()
        {
            s ^= s >> 12;
            s ^= s << 25;
            s ^= s >> 27;
            return s * 0x2545F4914F6CDD1Dull;
        }

        std::uint64_t below(std::uint64_t n) { return next() % n; }
        bool coin() { return next() & 1; }
    };

    inline OverlayAddr v4(std::uint32_t a, unsigned len = 32) { return OverlayAddr::ipv4(a, len); }

    /// Random IPv4 prefix drawn from a narrow space so prefixes nest often.
    inline OverlayAddr nested_v4(Gen &g)
    {
        const auto addr = static_cast<std::uint32_t>(0x0A000000u | (g.below(64) << 18) | (g.below(8) << 8) | g.below(4));
        static constexpr unsigned lens[] = {8, 12, 14, 16, 20, 24, 28, 30, 32};
        return OverlayAddr::ipv4(addr, lens[g.below(9)]);
    }

    /// Host address from the same space, for lookups.
    inline OverlayAddr nested_host(Gen &g)
    {
        return OverlayAddr::ipv4(static_cast<std::uint32_t>(0x0A000000u | (g.below(64) << 18) | (g.below(8) << 8) | g.below(4)), 32);
    }

    inline OverlayAddr random_v6(Gen &g, unsigned len)
    {
        OverlayAddr::Bytes b{};
        b[0] = 0xfd;
        for (int i = 1; i < 16; ++i)
            b[i] = static_cast<std::uint8_t>(g.below(4));
        return OverlayAddr::ipv6(b, len);
    }
}
