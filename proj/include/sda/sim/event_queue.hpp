#pragma once

#include "sda/core/types.hpp"

#include <cstddef>
#include <optional>
#include <queue>
#include <stdexcept>
#include <vector>

namespace sda
{
    /// Time-ordered event queue. Ties are broken by insertion order, so two
    /// events at the same instant run first-in first-out. Payloads live in a
    /// slab with a free list; the heap only moves small (time, seq, slot) keys.
    template <class Payload>
    class EventQueue
    {
    public:
        struct Popped
        {
            SimTime time;
            std::uint64_t seq;
            Payload payload;
        };

        explicit EventQueue(std::size_t max_pending = 0) : max_pending_(max_pending) {}

        /// Throws std::length_error when the configured bound would be exceeded.
        void push(SimTime at, Payload payload)
        {
            if (max_pending_ != 0 && heap_.size() >= max_pending_)
                throw std::length_error("event queue exceeded " + std::to_string(max_pending_) + " pending events");
            std::size_t slot;
            if (free_.empty())
            {
                slot = slab_.size();
                slab_.push_back(std::move(payload));
            }
            else
            {
                slot = free_.back();
                free_.pop_back();
                slab_[slot] = std::move(payload);
            }
            heap_.push(Key{at, next_seq_++, slot});
        }

        std::optional<Popped> pop()
        {
            if (heap_.empty())
                return std::nullopt;
            const Key k = heap_.top();
            heap_.pop();
            free_.push_back(k.slot);
            return Popped{k.time, k.seq, std::move(slab_[k.slot])};
        }

        SimTime next_time() const { return heap_.top().time; }
        bool empty() const noexcept { return heap_.empty(); }
        std::size_t size() const noexcept { return heap_.size(); }
        std::uint64_t pushed() const noexcept { return next_seq_; }

    private:
        struct Key
        {
            SimTime time;
            std::uint64_t seq;
            std::size_t slot;

            // std::priority_queue is a max-heap
            bool operator<(const Key &o) const noexcept { return time != o.time ? time > o.time : seq > o.seq; }
        };

        std::priority_queue<Key> heap_;
        std::vector<Payload> slab_;
        std::vector<std::size_t> free_;
        std::uint64_t next_seq_ = 0;
        std::size_t max_pending_;
    };
}
