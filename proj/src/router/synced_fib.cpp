#include "sda/router/synced_fib.hpp"

namespace sda
{
    SyncedFib::ApplyResult SyncedFib::apply(const SubscribeUpdateBody &update)
    {
        const MappingEntry &e = update.entry;
        std::uint64_t &seen = versions_[e.key];
        if (e.version < seen)
        {
            ++stale_;
            return ApplyResult::Stale;
        }
        seen = e.version;
        if (update.withdrawn)
            fib_.erase(e.key);
        else
            fib_.insert_or_assign(e.key, e);
        return ApplyResult::Applied;
    }

    std::uint64_t SyncedFib::version_of(const MappingKey &key) const
    {
        auto it = versions_.find(key);
        return it == versions_.end() ? 0 : it->second;
    }

    void SyncedFib::clear()
    {
        fib_.clear();
        versions_.clear();
    }
}
