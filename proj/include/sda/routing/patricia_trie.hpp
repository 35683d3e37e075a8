#pragma once

#include "sda/core/overlay_addr.hpp"

#include <cstddef>
#include <memory>
#include <optional>
#include <utility>

namespace sda
{
    /// Path-compressed binary trie over OverlayAddr prefixes of one family.
    ///
    /// Every node stores a prefix; a child's prefix strictly extends its
    /// parent's, and internal nodes without a value always have two children.
    /// A lookup therefore touches at most one node per distinct prefix length
    /// along its path, i.e. at most width + 1 nodes, regardless of how many
    /// prefixes are stored.
    template <class T>
    class PatriciaTrie
    {
    public:
        struct Match
        {
            const OverlayAddr *key = nullptr;
            const T *value = nullptr;
            unsigned visits = 0;

            explicit operator bool() const noexcept { return value != nullptr; }
        };

        PatriciaTrie() = default;
        PatriciaTrie(PatriciaTrie &&) noexcept = default;
        PatriciaTrie &operator=(PatriciaTrie &&) noexcept = default;

        std::size_t size() const noexcept { return size_; }
        bool empty() const noexcept { return size_ == 0; }

        void clear() noexcept
        {
            root_.reset();
            size_ = 0;
        }

        /// Returns true when the prefix was not present before.
        bool insert_or_assign(const OverlayAddr &prefix, T value)
        {
            std::unique_ptr<Node> *slot = &root_;
            while (true)
            {
                Node *node = slot->get();
                if (!node)
                {
                    *slot = std::make_unique<Node>(prefix, std::move(value));
                    ++size_;
                    return true;
                }
                const unsigned common = node->prefix.common_prefix(prefix);
                const unsigned node_len = node->prefix.prefix_len();
                const unsigned key_len = prefix.prefix_len();

                if (common == node_len && common == key_len)
                {
                    const bool fresh = !node->value.has_value();
                    node->value = std::move(value);
                    size_ += fresh ? 1 : 0;
                    return fresh;
                }
                if (common == node_len)
                {
                    slot = &node->child[prefix.bit(node_len)];
                    continue;
                }
                if (common == key_len)
                {
                    // new prefix sits above the existing node
                    auto above = std::make_unique<Node>(prefix, std::move(value));
                    const bool side = node->prefix.bit(key_len);
                    above->child[side] = std::move(*slot);
                    *slot = std::move(above);
                    ++size_;
                    return true;
                }
                // diverge below a shared stem
                auto fork = std::make_unique<Node>(prefix.truncated(common));
                const bool old_side = node->prefix.bit(common);
                fork->child[old_side] = std::move(*slot);
                fork->child[!old_side] = std::make_unique<Node>(prefix, std::move(value));
                *slot = std::move(fork);
                ++size_;
                return true;
            }
        }

        T *find(const OverlayAddr &prefix) noexcept
        {
            return const_cast<T *>(std::as_const(*this).find(prefix));
        }

        const T *find(const OverlayAddr &prefix) const noexcept
        {
            const Node *node = root_.get();
            while (node)
            {
                const unsigned node_len = node->prefix.prefix_len();
                if (node_len > prefix.prefix_len() || node->prefix.common_prefix(prefix) < node_len)
                    return nullptr;
                if (node_len == prefix.prefix_len())
                    return node->value ? &*node->value : nullptr;
                node = node->child[prefix.bit(node_len)].get();
            }
            return nullptr;
        }

        /// Most specific stored prefix covering query.
        Match longest_match(const OverlayAddr &query) const noexcept
        {
            Match best;
            const Node *node = root_.get();
            while (node)
            {
                ++best.visits;
                const unsigned node_len = node->prefix.prefix_len();
                if (node_len > query.prefix_len() || node->prefix.common_prefix(query) < node_len)
                    break;
                if (node->value)
                {
                    best.key = &node->prefix;
                    best.value = &*node->value;
                }
                if (node_len == query.prefix_len())
                    break;
                node = node->child[query.bit(node_len)].get();
            }
            return best;
        }

        /// Removes prefix; returns false when absent.
        bool erase(const OverlayAddr &prefix)
        {
            bool removed = false;
            erase_at(root_, prefix, removed);
            if (removed)
                --size_;
            return removed;
        }

        /// Visits (prefix, value) pairs in lexicographic bit order, shorter prefixes first.
        template <class Fn>
        void for_each(Fn &&fn) const
        {
            visit(root_.get(), fn);
        }

        /// Removes every entry for which pred(prefix, value) is true; returns the count.
        template <class Pred>
        std::size_t erase_if(Pred &&pred)
        {
            std::size_t n = 0;
            prune(root_, pred, n);
            size_ -= n;
            return n;
        }

    private:
        struct Node
        {
            explicit Node(const OverlayAddr &p) : prefix(p) {}
            Node(const OverlayAddr &p, T v) : prefix(p), value(std::move(v)) {}

            OverlayAddr prefix;
            std::optional<T> value;
            std::unique_ptr<Node> child[2];
        };

        // Restores the "valueless nodes have two children" shape at slot.
        static void compact(std::unique_ptr<Node> &slot)
        {
            Node *node = slot.get();
            if (!node || node->value)
                return;
            if (!node->child[0] && !node->child[1])
            {
                slot.reset();
            }
            else if (!node->child[0] || !node->child[1])
            {
                auto only = std::move(node->child[node->child[0] ? 0 : 1]);
                slot = std::move(only);
            }
        }

        static void erase_at(std::unique_ptr<Node> &slot, const OverlayAddr &prefix, bool &removed)
        {
            Node *node = slot.get();
            if (!node)
                return;
            const unsigned node_len = node->prefix.prefix_len();
            if (node_len > prefix.prefix_len() || node->prefix.common_prefix(prefix) < node_len)
                return;
            if (node_len == prefix.prefix_len())
            {
                if (node->value)
                {
                    node->value.reset();
                    removed = true;
                    compact(slot);
                }
                return;
            }
            erase_at(node->child[prefix.bit(node_len)], prefix, removed);
            if (removed)
                compact(slot);
        }

        template <class Fn>
        static void visit(const Node *node, Fn &fn)
        {
            if (!node)
                return;
            if (node->value)
                fn(node->prefix, *node->value);
            visit(node->child[0].get(), fn);
            visit(node->child[1].get(), fn);
        }

        template <class Pred>
        static void prune(std::unique_ptr<Node> &slot, Pred &pred, std::size_t &n)
        {
            Node *node = slot.get();
            if (!node)
                return;
            prune(node->child[0], pred, n);
            prune(node->child[1], pred, n);
            if (node->value && pred(node->prefix, *node->value))
            {
                node->value.reset();
                ++n;
            }
            compact(slot);
        }

        std::unique_ptr<Node> root_;
        std::size_t size_ = 0;
    };
}
