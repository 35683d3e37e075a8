#include "sda/core/overlay_addr.hpp"
#include "sda/core/types.hpp"

#include <arpa/inet.h>

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <stdexcept>

namespace sda
{
    const char *family_name(AddrFamily f) noexcept
    {
        switch (f)
        {
        case AddrFamily::IPv4:
            return "ipv4";
        case AddrFamily::IPv6:
            return "ipv6";
        case AddrFamily::MAC:
            return "mac";
        }
        return "?";
    }

    OverlayAddr::OverlayAddr(AddrFamily family, const Bytes &bytes, unsigned prefix_len)
        : bytes_(bytes), family_(family)
    {
        const unsigned w = family_width(family);
        if (prefix_len > w)
        {
            throw std::invalid_argument("prefix length " + std::to_string(prefix_len) + " exceeds " +
                                        std::to_string(w) + " bits for " + family_name(family));
        }
        prefix_len_ = static_cast<std::uint8_t>(prefix_len);
        // zero every bit at or past prefix_len
        for (unsigned byte = 0; byte < bytes_.size(); ++byte)
        {
            const unsigned first_bit = byte * 8;
            if (first_bit >= prefix_len)
            {
                bytes_[byte] = 0;
            }
            else if (first_bit + 8 > prefix_len)
            {
                const unsigned keep = prefix_len - first_bit;
                bytes_[byte] &= static_cast<std::uint8_t>(0xFFu << (8 - keep));
            }
        }
    }

    OverlayAddr OverlayAddr::ipv4(std::uint32_t addr, unsigned prefix_len)
    {
        Bytes b{};
        b[0] = static_cast<std::uint8_t>(addr >> 24);
        b[1] = static_cast<std::uint8_t>(addr >> 16);
        b[2] = static_cast<std::uint8_t>(addr >> 8);
        b[3] = static_cast<std::uint8_t>(addr);
        return OverlayAddr(AddrFamily::IPv4, b, prefix_len);
    }

    OverlayAddr OverlayAddr::ipv6(const Bytes &bytes, unsigned prefix_len)
    {
        return OverlayAddr(AddrFamily::IPv6, bytes, prefix_len);
    }

    OverlayAddr OverlayAddr::mac(std::uint64_t addr48)
    {
        if (addr48 >> 48)
        {
            throw std::invalid_argument("MAC address exceeds 48 bits");
        }
        Bytes b{};
        for (int i = 0; i < 6; ++i)
        {
            b[i] = static_cast<std::uint8_t>(addr48 >> (8 * (5 - i)));
        }
        return OverlayAddr(AddrFamily::MAC, b, 48);
    }

    OverlayAddr OverlayAddr::parse(const std::string &text)
    {
        std::string addr = text;
        int prefix = -1;
        if (auto slash = text.find('/'); slash != std::string::npos)
        {
            addr = text.substr(0, slash);
            const std::string len = text.substr(slash + 1);
            if (len.empty() || len.find_first_not_of("0123456789") != std::string::npos || len.size() > 3)
            {
                throw std::invalid_argument("bad prefix length in '" + text + "'");
            }
            prefix = std::stoi(len);
        }

        Bytes b{};
        if (in_addr v4{}; inet_pton(AF_INET, addr.c_str(), &v4) == 1)
        {
            std::memcpy(b.data(), &v4.s_addr, 4);
            return OverlayAddr(AddrFamily::IPv4, b, prefix < 0 ? 32u : static_cast<unsigned>(prefix));
        }
        if (in6_addr v6{}; inet_pton(AF_INET6, addr.c_str(), &v6) == 1)
        {
            std::memcpy(b.data(), v6.s6_addr, 16);
            return OverlayAddr(AddrFamily::IPv6, b, prefix < 0 ? 128u : static_cast<unsigned>(prefix));
        }
        unsigned m[6];
        char tail = 0;
        if (prefix < 0 && std::sscanf(addr.c_str(), "%2x:%2x:%2x:%2x:%2x:%2x%c", &m[0], &m[1], &m[2], &m[3], &m[4],
                                      &m[5], &tail) == 6)
        {
            for (int i = 0; i < 6; ++i)
                b[i] = static_cast<std::uint8_t>(m[i]);
            return OverlayAddr(AddrFamily::MAC, b, 48);
        }
        throw std::invalid_argument("unrecognized overlay address '" + text + "'");
    }

    OverlayAddr OverlayAddr::truncated(unsigned prefix_len) const
    {
        if (prefix_len > prefix_len_)
        {
            throw std::invalid_argument("cannot extend a prefix by truncation");
        }
        return OverlayAddr(family_, bytes_, prefix_len);
    }

    unsigned OverlayAddr::common_prefix(const OverlayAddr &other) const noexcept
    {
        const unsigned limit = std::min<unsigned>(prefix_len_, other.prefix_len_);
        unsigned n = 0;
        for (unsigned byte = 0; n < limit; ++byte)
        {
            const std::uint8_t diff = bytes_[byte] ^ other.bytes_[byte];
            if (diff == 0)
            {
                n += 8;
                continue;
            }
            n += static_cast<unsigned>(__builtin_clz(static_cast<unsigned>(diff)) - 24);
            break;
        }
        return std::min(n, limit);
    }

    bool OverlayAddr::contains(const OverlayAddr &other) const noexcept
    {
        return family_ == other.family_ && prefix_len_ <= other.prefix_len_ &&
               common_prefix(other) == prefix_len_;
    }

    std::uint32_t OverlayAddr::ipv4_value() const noexcept
    {
        return (std::uint32_t{bytes_[0]} << 24) | (std::uint32_t{bytes_[1]} << 16) |
               (std::uint32_t{bytes_[2]} << 8) | std::uint32_t{bytes_[3]};
    }

    std::uint64_t OverlayAddr::mac_value() const noexcept
    {
        std::uint64_t v = 0;
        for (int i = 0; i < 6; ++i)
            v = (v << 8) | bytes_[i];
        return v;
    }

    std::string OverlayAddr::to_string() const
    {
        char buf[INET6_ADDRSTRLEN + 8];
        switch (family_)
        {
        case AddrFamily::IPv4:
            std::snprintf(buf, sizeof buf, "%u.%u.%u.%u", bytes_[0], bytes_[1], bytes_[2], bytes_[3]);
            break;
        case AddrFamily::IPv6:
            inet_ntop(AF_INET6, bytes_.data(), buf, sizeof buf);
            break;
        case AddrFamily::MAC:
            std::snprintf(buf, sizeof buf, "%02x:%02x:%02x:%02x:%02x:%02x", bytes_[0], bytes_[1], bytes_[2],
                          bytes_[3], bytes_[4], bytes_[5]);
            return buf;
        }
        std::string s = buf;
        if (!is_host())
            s += "/" + std::to_string(prefix_len_);
        return s;
    }

    std::size_t OverlayAddrHash::operator()(const OverlayAddr &a) const noexcept
    {
        // FNV-1a over the significant bytes
        std::uint64_t h = 1469598103934665603ull;
        auto mix = [&h](std::uint8_t b) {
            h ^= b;
            h *= 1099511628211ull;
        };
        mix(static_cast<std::uint8_t>(a.family()));
        mix(static_cast<std::uint8_t>(a.prefix_len()));
        const unsigned n = (a.width() + 7) / 8;
        for (unsigned i = 0; i < n; ++i)
            mix(a.bytes()[i]);
        return static_cast<std::size_t>(h);
    }

    std::string UnderlayAddr::to_string() const
    {
        char buf[16];
        std::snprintf(buf, sizeof buf, "%u.%u.%u.%u", value_ >> 24, (value_ >> 16) & 0xFF, (value_ >> 8) & 0xFF,
                      value_ & 0xFF);
        return buf;
    }

    UnderlayAddr UnderlayAddr::parse(const std::string &dotted)
    {
        in_addr v4{};
        if (inet_pton(AF_INET, dotted.c_str(), &v4) != 1)
        {
            throw std::invalid_argument("bad underlay address '" + dotted + "'");
        }
        return UnderlayAddr(ntohl(v4.s_addr));
    }
}
