#pragma once

#include "sda/core/control.hpp"
#include "sda/routing/patricia_trie.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <unordered_map>
#include <variant>
#include <vector>

namespace sda
{
    enum class RegisterResult : std::uint8_t
    {
        Created,
        Updated,
    };

    struct RegisterOutcome
    {
        RegisterResult result = RegisterResult::Created;
        /// Locator held before this registration (Updated only).
        std::optional<UnderlayAddr> previous_locator;
        MappingEntry stored;

        bool moved() const noexcept { return previous_locator && *previous_locator != stored.locator; }
    };

    enum class WithdrawResult : std::uint8_t
    {
        Removed,
        NotFound,
        Rejected,
    };

    using ResolveResult = std::variant<MapReplyBody, NegativeMapReplyBody>;

    using SubscriptionHandle = std::uint64_t;

    struct TrieStats
    {
        /// Trie nodes touched by the most recent resolve.
        unsigned node_visits = 0;
        std::size_t entry_count = 0;
        std::uint64_t queries = 0;
        std::uint64_t total_visits = 0;
        unsigned max_visits = 0;
    };

    /// Logically centralized endpoint-location database.
    ///
    /// Mappings live in one Patricia trie per (VN, address family), so keys in
    /// different VNs can never match each other. Operations append the control
    /// messages they cause to an output vector; delivery is the caller's job.
    class RoutingServer
    {
    public:
        explicit RoutingServer(UnderlayAddr self) : self_(self) {}

        UnderlayAddr locator() const noexcept { return self_; }

        /// Stores entry with a fresh version. A locator change solicits the
        /// previous locator; every accepted registration is streamed to
        /// subscribers. Throws std::invalid_argument when registrar does not
        /// match entry.locator.
        RegisterOutcome register_mapping(const MappingEntry &entry, UnderlayAddr registrar, SimTime now,
                                         std::vector<ControlOut> &out, CauseId cause = 0);

        /// Longest-prefix match within the key's VN and family.
        ResolveResult resolve(const MappingKey &key);

        WithdrawResult withdraw(const MappingKey &key, UnderlayAddr registrar, SimTime now,
                                std::vector<ControlOut> &out, CauseId cause = 0);

        /// Snapshot of the whole store to border, then every later change.
        /// Subscribing again replaces the previous subscription.
        SubscriptionHandle subscribe(UnderlayAddr border, std::vector<ControlOut> &out);
        void unsubscribe(UnderlayAddr border);

        TrieStats query_stats() const;

        /// Dispatches MapRequest and MapRegister messages.
        void handle(const ControlMessage &msg, SimTime now, std::vector<ControlOut> &out);

        const MappingEntry *find_exact(const MappingKey &key) const;
        std::size_t entry_count() const noexcept { return entry_count_; }
        std::size_t subscriber_count() const noexcept { return subscribers_.size(); }
        std::optional<OverlayAddr> l2_binding(const MappingKey &ip_key) const;

        template <class Fn>
        void for_each_entry(Fn &&fn) const
        {
            for (const auto &[tk, trie] : tries_)
                trie.for_each([&](const OverlayAddr &, const MappingEntry &e) { fn(e); });
        }

    private:
        struct TrieKey
        {
            std::uint32_t vn;
            AddrFamily family;
            friend auto operator<=>(const TrieKey &, const TrieKey &) = default;
        };

        PatriciaTrie<MappingEntry> &trie_for(const MappingKey &key) { return tries_[{key.vn.value(), key.addr.family()}]; }
        const PatriciaTrie<MappingEntry> *trie_for(const MappingKey &key) const;

        RegisterOutcome apply_register(const MappingEntry &entry, UnderlayAddr registrar, SimTime now,
                                       std::vector<ControlOut> &out, CauseId cause);
        void notify_subscribers(const MappingEntry &entry, bool withdrawn, std::vector<ControlOut> &out,
                                CauseId cause) const;

        UnderlayAddr self_;
        std::map<TrieKey, PatriciaTrie<MappingEntry>> tries_;
        std::unordered_map<MappingKey, OverlayAddr, MappingKeyHash> l2_bindings_;
        std::map<UnderlayAddr, SubscriptionHandle> subscribers_;
        SubscriptionHandle next_handle_ = 1;
        std::uint64_t next_version_ = 1;
        std::size_t entry_count_ = 0;
        TrieStats stats_;
    };
}
