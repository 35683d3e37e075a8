#pragma once

#include "sda/core/control.hpp"
#include "sda/routing/keyed_tries.hpp"

#include <random>
#include <vector>

namespace sda
{
    /// A control message the reflector releases at a given time.
    struct TimedControl
    {
        SimTime at = 0;
        ControlOut out;
    };

    /// Centralized route reflector of the proactive baseline: every
    /// registration is replicated to every edge.
    ///
    /// Each update is fanned out serially in a random peer order drawn from
    /// the seeded generator; the push to the k-th peer (0-based) leaves at
    /// now + (k + 1) * push_delay. Distinct updates fan out independently.
    class RouteReflector
    {
    public:
        RouteReflector(UnderlayAddr self, std::vector<UnderlayAddr> peers, SimTime push_delay, std::uint64_t seed);

        UnderlayAddr locator() const noexcept { return self_; }
        const std::vector<UnderlayAddr> &peers() const noexcept { return peers_; }

        /// Stores the records and pushes them to all peers. Returns the number
        /// of push messages emitted.
        std::size_t push_update(std::vector<MappingEntry> entries, bool withdrawn, SimTime now, CauseId cause,
                                std::vector<TimedControl> &out);

        /// MapRegister (register or withdraw) from an edge; everything else is ignored.
        void handle(const ControlMessage &msg, SimTime now, std::vector<TimedControl> &out);

        const MappingEntry *find(const MappingKey &key) const { return table_.find(key); }
        std::size_t entry_count() const noexcept { return table_.size(); }
        std::uint64_t pushes_sent() const noexcept { return pushes_; }

        template <class Fn>
        void for_each_entry(Fn &&fn) const
        {
            table_.for_each(fn);
        }

    private:
        UnderlayAddr self_;
        std::vector<UnderlayAddr> peers_;
        SimTime push_delay_;
        std::mt19937_64 rng_;
        KeyedTries<MappingEntry> table_;
        std::uint64_t next_version_ = 1;
        std::uint64_t pushes_ = 0;
        std::vector<std::size_t> order_;
    };
}
