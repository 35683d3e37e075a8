#include "sda/routing/routing_server.hpp"
#include <utility>

#include <algorithm>
#include <stdexcept>

namespace sda
{
    const PatriciaTrie<MappingEntry> *RoutingServer::trie_for(const MappingKey &key) const
    {
        auto it = tries_.find({key.vn.value(), key.addr.family()});
        return it == tries_.end() ? nullptr : &it->second;
    }

    void RoutingServer::notify_subscribers(const MappingEntry &entry, bool withdrawn, std::vector<ControlOut> &out,
                                           CauseId cause) const
    {
        for (const auto &[border, handle] : subscribers_)
        {
            out.push_back({border, {self_, cause, SubscribeUpdateBody{entry, withdrawn}}});
        }
    }

    RegisterOutcome RoutingServer::apply_register(const MappingEntry &entry, UnderlayAddr registrar, SimTime now,
                                                  std::vector<ControlOut> &out, CauseId cause)
    {
        if (registrar != entry.locator)
        {
            throw std::invalid_argument("register: registrar " + registrar.to_string() + " is not the locator " +
                                        entry.locator.to_string());
        }
        auto &trie = trie_for(entry.key);
        RegisterOutcome outcome;
        MappingEntry stored = entry;
        stored.registered_at = now;
        stored.version = next_version_++;
        if (MappingEntry *existing = trie.find(entry.key.addr))
        {
            outcome.result = RegisterResult::Updated;
            outcome.previous_locator = existing->locator;
            *existing = stored;
        }
        else
        {
            outcome.result = RegisterResult::Created;
            trie.insert_or_assign(entry.key.addr, stored);
            ++entry_count_;
        }
        outcome.stored = stored;
        notify_subscribers(stored, false, out, cause);
        return outcome;
    }

    RegisterOutcome RoutingServer::register_mapping(const MappingEntry &entry, UnderlayAddr registrar, SimTime now,
                                                    std::vector<ControlOut> &out, CauseId cause)
    {
        RegisterOutcome outcome = apply_register(entry, registrar, now, out, cause);
        if (outcome.moved())
        {
            out.push_back({*outcome.previous_locator, {self_, cause, SolicitUpdateBody{{entry.key}}}});
        }
        return outcome;
    }

    ResolveResult RoutingServer::resolve(const MappingKey &key)
    {
        const auto *trie = std::as_const(*this).trie_for(key);
        unsigned visits = 0;
        const MappingEntry *found = nullptr;
        if (trie)
        {
            auto match = trie->longest_match(key.addr);
            visits = match.visits;
            found = match.value;
        }
        stats_.node_visits = visits;
        stats_.max_visits = std::max(stats_.max_visits, visits);
        stats_.total_visits += visits;
        ++stats_.queries;
        if (!found)
        {
            return NegativeMapReplyBody{key};
        }
        return MapReplyBody{key, *found, std::nullopt};
    }

    WithdrawResult RoutingServer::withdraw(const MappingKey &key, UnderlayAddr registrar, SimTime now,
                                           std::vector<ControlOut> &out, CauseId cause)
    {
        auto it = tries_.find({key.vn.value(), key.addr.family()});
        if (it == tries_.end())
            return WithdrawResult::NotFound;
        MappingEntry *existing = it->second.find(key.addr);
        if (!existing)
            return WithdrawResult::NotFound;
        if (existing->locator != registrar)
            return WithdrawResult::Rejected;

        MappingEntry gone = *existing;
        gone.version = next_version_++;
        gone.registered_at = now;
        it->second.erase(key.addr);
        --entry_count_;
        l2_bindings_.erase(key);
        notify_subscribers(gone, true, out, cause);
        return WithdrawResult::Removed;
    }

    SubscriptionHandle RoutingServer::subscribe(UnderlayAddr border, std::vector<ControlOut> &out)
    {
        const SubscriptionHandle handle = next_handle_++;
        subscribers_[border] = handle;
        for_each_entry([&](const MappingEntry &e) {
            out.push_back({border, {self_, 0, SubscribeUpdateBody{e, false}}});
        });
        return handle;
    }

    void RoutingServer::unsubscribe(UnderlayAddr border)
    {
        subscribers_.erase(border);
    }

    TrieStats RoutingServer::query_stats() const
    {
        TrieStats s = stats_;
        s.entry_count = entry_count_;
        return s;
    }

    const MappingEntry *RoutingServer::find_exact(const MappingKey &key) const
    {
        const auto *trie = std::as_const(*this).trie_for(key);
        return trie ? trie->find(key.addr) : nullptr;
    }

    std::optional<OverlayAddr> RoutingServer::l2_binding(const MappingKey &ip_key) const
    {
        auto it = l2_bindings_.find(ip_key);
        if (it == l2_bindings_.end())
            return std::nullopt;
        return it->second;
    }

    void RoutingServer::handle(const ControlMessage &msg, SimTime now, std::vector<ControlOut> &out)
    {
        if (const auto *req = std::get_if<MapRequestBody>(&msg.body))
        {
            for (const auto &key : req->keys)
            {
                ResolveResult r = resolve(key);
                if (auto *reply = std::get_if<MapReplyBody>(&r); reply && req->want_l2_binding)
                {
                    // the binding is stored against the registered host key
                    reply->l2_binding = l2_binding(reply->entry.key);
                    if (!reply->l2_binding)
                    {
                        out.push_back({msg.from, {self_, msg.cause, NegativeMapReplyBody{key}}});
                        continue;
                    }
                }
                std::visit([&](auto &&body) { out.push_back({msg.from, {self_, msg.cause, std::move(body)}}); },
                           std::move(r));
            }
            return;
        }
        if (const auto *reg = std::get_if<MapRegisterBody>(&msg.body))
        {
            if (reg->withdraw)
            {
                for (const auto &rec : reg->records)
                    withdraw(rec.key, reg->locator, now, out, msg.cause);
                return;
            }
            // one solicit per previous locator, listing every key that moved away from it
            std::map<UnderlayAddr, std::vector<MappingKey>> moved;
            for (const auto &rec : reg->records)
            {
                MappingEntry e{rec.key, reg->locator, rec.group, now, 0};
                RegisterOutcome o = apply_register(e, reg->locator, now, out, msg.cause);
                if (o.moved())
                    moved[*o.previous_locator].push_back(rec.key);
                if (reg->l2_addr && rec.key.addr.family() != AddrFamily::MAC)
                    l2_bindings_[rec.key] = *reg->l2_addr;
            }
            for (auto &[prev, keys] : moved)
            {
                out.push_back({prev, {self_, msg.cause, SolicitUpdateBody{std::move(keys)}}});
            }
        }
    }
}
