#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>

namespace sda
{
    enum class AddrFamily : std::uint8_t
    {
        IPv4,
        IPv6,
        MAC,
    };

    constexpr unsigned family_width(AddrFamily f) noexcept
    {
        switch (f)
        {
        case AddrFamily::IPv4:
            return 32;
        case AddrFamily::IPv6:
            return 128;
        case AddrFamily::MAC:
            return 48;
        }
        return 0;
    }

    const char *family_name(AddrFamily f) noexcept;

    /// An overlay address or prefix. Bits are stored most-significant first,
    /// left aligned; everything past prefix_len is forced to zero on
    /// construction, so two values denoting the same prefix compare equal.
    class OverlayAddr
    {
    public:
        using Bytes = std::array<std::uint8_t, 16>;

        OverlayAddr() = default;
        OverlayAddr(AddrFamily family, const Bytes &bytes, unsigned prefix_len);

        static OverlayAddr ipv4(std::uint32_t addr, unsigned prefix_len = 32);
        static OverlayAddr ipv6(const Bytes &bytes, unsigned prefix_len = 128);
        static OverlayAddr mac(std::uint64_t addr48);
        static OverlayAddr broadcast_mac() { return mac(0xFFFFFFFFFFFFull); }

        /// Accepts "a.b.c.d[/n]", IPv6 text "x::y[/n]" and "aa:bb:cc:dd:ee:ff".
        static OverlayAddr parse(const std::string &text);

        AddrFamily family() const noexcept { return family_; }
        unsigned prefix_len() const noexcept { return prefix_len_; }
        unsigned width() const noexcept { return family_width(family_); }
        bool is_host() const noexcept { return prefix_len_ == width(); }
        const Bytes &bytes() const noexcept { return bytes_; }

        /// Bit i counted from the most significant end.
        bool bit(unsigned i) const noexcept { return (bytes_[i >> 3] >> (7 - (i & 7))) & 1u; }

        /// Same address truncated to a shorter prefix.
        OverlayAddr truncated(unsigned prefix_len) const;

        /// True when this prefix covers other (same family, shorter or equal length).
        bool contains(const OverlayAddr &other) const noexcept;

        /// Number of leading bits shared with other, capped at both prefix lengths.
        unsigned common_prefix(const OverlayAddr &other) const noexcept;

        std::uint32_t ipv4_value() const noexcept;
        std::uint64_t mac_value() const noexcept;

        bool is_broadcast_mac() const noexcept { return family_ == AddrFamily::MAC && mac_value() == 0xFFFFFFFFFFFFull; }

        std::string to_string() const;

        friend bool operator==(const OverlayAddr &, const OverlayAddr &) = default;
        friend auto operator<=>(const OverlayAddr &a, const OverlayAddr &b)
        {
            if (auto c = a.family_ <=> b.family_; c != 0)
                return c;
            if (auto c = a.bytes_ <=> b.bytes_; c != 0)
                return c;
            return a.prefix_len_ <=> b.prefix_len_;
        }

    private:
        Bytes bytes_{};
        AddrFamily family_ = AddrFamily::IPv4;
        std::uint8_t prefix_len_ = 0;
    };

    /// Hashes family, prefix length and address bytes.
    struct OverlayAddrHash
    {
        std::size_t operator()(const OverlayAddr &a) const noexcept;
    };
}

template <>
struct std::hash<sda::OverlayAddr> : sda::OverlayAddrHash
{
};
