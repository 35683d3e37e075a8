#pragma once

#include "sda/core/mapping.hpp"
#include "sda/routing/keyed_tries.hpp"

#include <optional>
#include <vector>

namespace sda
{
    enum class CacheState : std::uint8_t
    {
        Fresh,
        Resolving,
        Negative,
    };

    const char *cache_state_name(CacheState s) noexcept;

    struct MapCacheEntry
    {
        MappingKey key;
        UnderlayAddr locator;
        SimTime learned_at = 0;
        SimTime ttl = 0;
        CacheState state = CacheState::Resolving;

        /// Path kept while a solicited entry is re-resolved.
        std::optional<UnderlayAddr> stale_locator;
        SimTime requested_at = 0;
        unsigned retries_used = 0;
        std::uint64_t version = 0;
        CauseId cause = 0;
        /// Senders already told to refresh this entry.
        std::vector<UnderlayAddr> solicited;

        bool expired(SimTime now) const noexcept { return state != CacheState::Resolving && now >= learned_at + ttl; }
    };

    /// An edge's reactive FIB: mappings learned on demand, longest-prefix
    /// matched, expired lazily on access.
    class MapCache
    {
    public:
        struct Timers
        {
            SimTime fresh_ttl = 24 * 3600 * kMicrosPerSecond;
            SimTime negative_ttl = 60 * kMicrosPerSecond;
            unsigned negative_retries = 3;
            SimTime resolve_timeout = kMicrosPerSecond;
        };

        MapCache() = default;
        explicit MapCache(Timers timers) : timers_(timers) {}

        const Timers &timers() const noexcept { return timers_; }

        /// Most specific live entry covering key; expired entries on the path are dropped.
        MapCacheEntry *lookup(const MappingKey &key, SimTime now);
        MapCacheEntry *find_exact(const MappingKey &key) { return entries_.find(key); }

        /// Places a Resolving placeholder for key, keeping any previous locator as the stale path.
        MapCacheEntry &mark_resolving(const MappingKey &key, SimTime now, std::optional<UnderlayAddr> stale_locator);

        MapCacheEntry &install_fresh(const MappingEntry &entry, SimTime now, CauseId cause);
        MapCacheEntry &install_negative(const MappingKey &key, SimTime now, unsigned retries_used);

        bool erase(const MappingKey &key) { return entries_.erase(key); }

        /// Drops every entry pointing at locator, including stale paths of
        /// Resolving entries. Returns how many entries were removed.
        std::size_t erase_locator(UnderlayAddr locator);

        /// Removes expired entries.
        std::size_t sweep(SimTime now);

        std::size_t fresh_count(SimTime now) const;
        std::size_t size() const noexcept { return entries_.size(); }
        void clear() noexcept { entries_.clear(); }

        template <class Fn>
        void for_each(Fn &&fn) const
        {
            entries_.for_each(fn);
        }

    private:
        Timers timers_;
        KeyedTries<MapCacheEntry> entries_;
    };
}
