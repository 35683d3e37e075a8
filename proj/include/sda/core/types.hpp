#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>

namespace sda
{
    /// Simulated time in microseconds.
    using SimTime = std::int64_t;

    inline constexpr SimTime kMicrosPerMilli = 1000;
    inline constexpr SimTime kMicrosPerSecond = 1000 * 1000;

    using EndpointId = std::uint32_t;
    using PortId = std::uint32_t;
    using PacketId = std::uint64_t;

    /// Trace tag carried by control messages so signaling can be attributed to
    /// the event (a move, an ARP transaction) that caused it. Zero means none.
    using CauseId = std::uint64_t;

    /// 24-bit virtual network identifier.
    class Vn
    {
    public:
        static constexpr std::uint32_t kLimit = 1u << 24;

        constexpr Vn() = default;
        explicit Vn(std::uint64_t value) : value_(checked(value)) {}

        constexpr std::uint32_t value() const noexcept { return value_; }

        friend constexpr auto operator<=>(Vn, Vn) = default;

    private:
        static std::uint32_t checked(std::uint64_t v)
        {
            if (v >= kLimit)
            {
                throw std::invalid_argument("VN " + std::to_string(v) + " exceeds 24 bits");
            }
            return static_cast<std::uint32_t>(v);
        }

        std::uint32_t value_ = 0;
    };

    /// 16-bit group tag carried in the data plane.
    class GroupId
    {
    public:
        static constexpr std::uint32_t kLimit = 1u << 16;

        constexpr GroupId() = default;
        explicit GroupId(std::uint64_t value) : value_(checked(value)) {}

        constexpr std::uint16_t value() const noexcept { return value_; }

        friend constexpr auto operator<=>(GroupId, GroupId) = default;

    private:
        static std::uint16_t checked(std::uint64_t v)
        {
            if (v >= kLimit)
            {
                throw std::invalid_argument("GroupId " + std::to_string(v) + " exceeds 16 bits");
            }
            return static_cast<std::uint16_t>(v);
        }

        std::uint16_t value_ = 0;
    };

    /// IPv4 locator of an edge, border or control node on the underlay.
    class UnderlayAddr
    {
    public:
        constexpr UnderlayAddr() = default;
        constexpr explicit UnderlayAddr(std::uint32_t v) : value_(v) {}

        constexpr std::uint32_t value() const noexcept { return value_; }
        constexpr bool is_null() const noexcept { return value_ == 0; }

        std::string to_string() const;
        static UnderlayAddr parse(const std::string &dotted);

        friend constexpr auto operator<=>(UnderlayAddr, UnderlayAddr) = default;

    private:
        std::uint32_t value_ = 0;
    };
}

template <>
struct std::hash<sda::UnderlayAddr>
{
    std::size_t operator()(sda::UnderlayAddr a) const noexcept { return std::hash<std::uint32_t>{}(a.value()); }
};
