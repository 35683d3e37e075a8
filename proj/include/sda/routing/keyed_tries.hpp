#pragma once

#include "sda/core/mapping.hpp"
#include "sda/routing/patricia_trie.hpp"

#include <map>

namespace sda
{
    /// One PatriciaTrie per (VN, address family), addressed by MappingKey.
    template <class T>
    class KeyedTries
    {
    public:
        using Match = typename PatriciaTrie<T>::Match;

        std::size_t size() const noexcept { return size_; }

        bool insert_or_assign(const MappingKey &key, T value)
        {
            const bool fresh = tries_[slot(key)].insert_or_assign(key.addr, std::move(value));
            size_ += fresh ? 1 : 0;
            return fresh;
        }

        T *find(const MappingKey &key) noexcept
        {
            auto it = tries_.find(slot(key));
            return it == tries_.end() ? nullptr : it->second.find(key.addr);
        }

        const T *find(const MappingKey &key) const noexcept
        {
            auto it = tries_.find(slot(key));
            return it == tries_.end() ? nullptr : it->second.find(key.addr);
        }

        Match longest_match(const MappingKey &key) const noexcept
        {
            auto it = tries_.find(slot(key));
            return it == tries_.end() ? Match{} : it->second.longest_match(key.addr);
        }

        bool erase(const MappingKey &key)
        {
            auto it = tries_.find(slot(key));
            if (it == tries_.end() || !it->second.erase(key.addr))
                return false;
            --size_;
            return true;
        }

        template <class Pred>
        std::size_t erase_if(Pred &&pred)
        {
            std::size_t n = 0;
            for (auto &[s, trie] : tries_)
                n += trie.erase_if([&](const OverlayAddr &, const T &v) { return pred(v); });
            size_ -= n;
            return n;
        }

        template <class Fn>
        void for_each(Fn &&fn) const
        {
            for (const auto &[s, trie] : tries_)
                trie.for_each([&](const OverlayAddr &, const T &v) { fn(v); });
        }

        void clear() noexcept
        {
            tries_.clear();
            size_ = 0;
        }

    private:
        struct Slot
        {
            std::uint32_t vn;
            AddrFamily family;
            friend auto operator<=>(const Slot &, const Slot &) = default;
        };

        static Slot slot(const MappingKey &k) noexcept { return {k.vn.value(), k.addr.family()}; }

        std::map<Slot, PatriciaTrie<T>> tries_;
        std::size_t size_ = 0;
    };
}
