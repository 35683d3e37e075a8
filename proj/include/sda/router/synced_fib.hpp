#pragma once

#include "sda/core/control.hpp"
#include "sda/routing/keyed_tries.hpp"

#include <unordered_map>

namespace sda
{
    /// A border's full copy of the routing-server store, fed by the
    /// subscription stream. Updates older than the last applied version of a
    /// key are rejected, so reordering can never resurrect stale state.
    class SyncedFib
    {
    public:
        enum class ApplyResult : std::uint8_t
        {
            Applied,
            Stale,
        };

        ApplyResult apply(const SubscribeUpdateBody &update);

        KeyedTries<MappingEntry>::Match lookup(const MappingKey &key) const { return fib_.longest_match(key); }
        const MappingEntry *find_exact(const MappingKey &key) const { return fib_.find(key); }

        std::size_t size() const noexcept { return fib_.size(); }
        std::uint64_t stale_updates() const noexcept { return stale_; }
        std::uint64_t version_of(const MappingKey &key) const;

        void clear();

        template <class Fn>
        void for_each(Fn &&fn) const
        {
            fib_.for_each(fn);
        }

    private:
        KeyedTries<MappingEntry> fib_;
        std::unordered_map<MappingKey, std::uint64_t, MappingKeyHash> versions_;
        std::uint64_t stale_ = 0;
    };
}
