#include "sda/proactive/route_reflector.hpp"

#include <numeric>

namespace sda
{
    RouteReflector::RouteReflector(UnderlayAddr self, std::vector<UnderlayAddr> peers, SimTime push_delay,
                                   std::uint64_t seed)
        : self_(self), peers_(std::move(peers)), push_delay_(push_delay), rng_(seed), order_(peers_.size())
    {
        if (push_delay_ < 0)
            throw std::invalid_argument("push delay must be non-negative");
    }

    std::size_t RouteReflector::push_update(std::vector<MappingEntry> entries, bool withdrawn, SimTime now,
                                            CauseId cause, std::vector<TimedControl> &out)
    {
        if (entries.empty())
            return 0;
        for (MappingEntry &e : entries)
        {
            e.version = next_version_++;
            if (withdrawn)
                table_.erase(e.key);
            else
                table_.insert_or_assign(e.key, e);
        }

        // Fisher-Yates with raw draws keeps the order identical across standard libraries
        std::iota(order_.begin(), order_.end(), std::size_t{0});
        for (std::size_t i = order_.size(); i > 1; --i)
            std::swap(order_[i - 1], order_[rng_() % i]);

        const ProactivePushBody body{std::move(entries), withdrawn};
        for (std::size_t k = 0; k < order_.size(); ++k)
        {
            const SimTime at = now + static_cast<SimTime>(k + 1) * push_delay_;
            out.push_back({at, ControlOut{peers_[order_[k]], ControlMessage{self_, cause, body}}});
        }
        pushes_ += order_.size();
        return order_.size();
    }

    void RouteReflector::handle(const ControlMessage &msg, SimTime now, std::vector<TimedControl> &out)
    {
        if (msg.kind() != MsgKind::MapRegister)
            return;
        const auto &reg = msg.as<MapRegisterBody>();
        if (reg.locator != msg.from)
            return;
        std::vector<MappingEntry> entries;
        for (const RegisterRecord &r : reg.records)
        {
            if (reg.withdraw)
            {
                // only the current owner may retract a route
                const MappingEntry *cur = table_.find(r.key);
                if (!cur || cur->locator != reg.locator)
                    continue;
                entries.push_back(*cur);
                continue;
            }
            entries.push_back(MappingEntry{r.key, reg.locator, r.group, now, 0});
        }
        push_update(std::move(entries), reg.withdraw, now, msg.cause, out);
    }
}
