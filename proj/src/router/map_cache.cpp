#include "sda/router/map_cache.hpp"

namespace sda
{
    const char *cache_state_name(CacheState s) noexcept
    {
        switch (s)
        {
        case CacheState::Fresh:
            return "fresh";
        case CacheState::Resolving:
            return "resolving";
        case CacheState::Negative:
            return "negative";
        }
        return "?";
    }

    MapCacheEntry *MapCache::lookup(const MappingKey &key, SimTime now)
    {
        while (true)
        {
            auto match = entries_.longest_match(key);
            if (!match)
                return nullptr;
            if (!match.value->expired(now))
                return const_cast<MapCacheEntry *>(match.value);
            entries_.erase({key.vn, *match.key});
        }
    }

    MapCacheEntry &MapCache::mark_resolving(const MappingKey &key, SimTime now,
                                            std::optional<UnderlayAddr> stale_locator)
    {
        MapCacheEntry e;
        e.key = key;
        e.state = CacheState::Resolving;
        e.requested_at = now;
        e.learned_at = now;
        e.stale_locator = stale_locator;
        if (const MapCacheEntry *prev = entries_.find(key))
            e.retries_used = prev->retries_used;
        entries_.insert_or_assign(key, e);
        return *entries_.find(key);
    }

    MapCacheEntry &MapCache::install_fresh(const MappingEntry &entry, SimTime now, CauseId cause)
    {
        MapCacheEntry e;
        e.key = entry.key;
        e.locator = entry.locator;
        e.learned_at = now;
        e.ttl = timers_.fresh_ttl;
        e.state = CacheState::Fresh;
        e.version = entry.version;
        e.cause = cause;
        entries_.insert_or_assign(entry.key, e);
        return *entries_.find(entry.key);
    }

    MapCacheEntry &MapCache::install_negative(const MappingKey &key, SimTime now, unsigned retries_used)
    {
        MapCacheEntry e;
        e.key = key;
        e.learned_at = now;
        e.requested_at = now;
        e.ttl = timers_.negative_ttl;
        e.state = CacheState::Negative;
        e.retries_used = retries_used;
        entries_.insert_or_assign(key, e);
        return *entries_.find(key);
    }

    std::size_t MapCache::erase_locator(UnderlayAddr locator)
    {
        return entries_.erase_if([locator](const MapCacheEntry &e) {
            return (e.state == CacheState::Fresh && e.locator == locator) ||
                   (e.state == CacheState::Resolving && e.stale_locator == locator);
        });
    }

    std::size_t MapCache::sweep(SimTime now)
    {
        return entries_.erase_if([now](const MapCacheEntry &e) { return e.expired(now); });
    }

    std::size_t MapCache::fresh_count(SimTime now) const
    {
        std::size_t n = 0;
        entries_.for_each([&](const MapCacheEntry &e) {
            if (e.state == CacheState::Fresh && !e.expired(now))
                ++n;
        });
        return n;
    }
}
