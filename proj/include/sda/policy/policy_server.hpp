#pragma once

#include "sda/core/control.hpp"

#include <map>
#include <optional>
#include <set>
#include <tuple>
#include <unordered_map>
#include <variant>
#include <vector>

namespace sda
{
    struct AuthFailure
    {
        EndpointId endpoint_id = 0;
        std::string reason;
    };

    using AuthOutcome = std::variant<AuthResult, AuthFailure>;

    struct MatrixChange
    {
        enum class Op : std::uint8_t
        {
            Add,
            Remove,
            Flip,
        };

        Op op = Op::Add;
        /// For Remove and Flip only vn/src/dst are read.
        ConnectivityRule rule;
    };

    struct MatrixUpdateOutcome
    {
        std::uint64_t version = 0;
        bool changed = false;
        std::set<UnderlayAddr> affected_edges;
    };

    /// Endpoint credentials, (VN, group) assignments and the per-VN group
    /// connectivity matrix. Pairs without a rule take default_action.
    class PolicyServer
    {
    public:
        explicit PolicyServer(UnderlayAddr self, Action default_action = Action::Deny)
            : self_(self), default_action_(default_action)
        {
        }

        UnderlayAddr locator() const noexcept { return self_; }
        Action default_action() const noexcept { return default_action_; }
        std::uint64_t matrix_version() const noexcept { return version_; }
        std::size_t rule_count() const noexcept { return rules_.size(); }

        /// Adds or replaces a roster entry.
        void add_endpoint(EndpointRecord record);
        const EndpointRecord *endpoint(EndpointId id) const;

        /// Installs a rule without notifying anyone (scenario load).
        void load_rule(const ConnectivityRule &rule);

        AuthOutcome authenticate(EndpointId id, const std::string &token) const;

        /// Applies change and pushes the new destination-filtered rule set to
        /// every edge currently hosting an endpoint of the rule's dst group.
        MatrixUpdateOutcome update_matrix(const MatrixChange &change, std::vector<ControlOut> &out);

        /// Moves an endpoint to new_group and triggers re-authentication at its
        /// current edge. Returns the number of control messages emitted.
        /// Throws std::invalid_argument for an unknown endpoint.
        std::size_t reassign_group(EndpointId id, GroupId new_group, std::vector<ControlOut> &out);

        std::vector<ConnectivityRule> rules_for_destination_group(Vn vn, GroupId dst) const;
        Action evaluate(Vn vn, GroupId src, GroupId dst) const;

        template <class Fn>
        void for_each_rule(Fn &&fn) const
        {
            for (const auto &[k, action] : rules_)
                fn(ConnectivityRule{Vn(std::get<0>(k)), GroupId(std::get<2>(k)), GroupId(std::get<1>(k)), action});
        }

        /// AuthRequest → AuthReply; a success records where the endpoint is attached.
        void handle(const ControlMessage &msg, std::vector<ControlOut> &out);

        /// Accounting stop from an edge: the endpoint is no longer attached there.
        void session_ended(EndpointId id, UnderlayAddr edge);
        std::optional<UnderlayAddr> attachment(EndpointId id) const;

    private:
        // (vn, dst, src) so destination-filtered queries are a range scan
        using RuleKey = std::tuple<std::uint32_t, std::uint16_t, std::uint16_t>;

        static RuleKey key_of(const ConnectivityRule &r)
        {
            return {r.vn.value(), r.dst_group.value(), r.src_group.value()};
        }

        AuthResult make_result(const EndpointRecord &rec) const;
        std::set<UnderlayAddr> edges_hosting(Vn vn, GroupId group) const;

        UnderlayAddr self_;
        Action default_action_;
        std::uint64_t version_ = 0;
        std::map<RuleKey, Action> rules_;
        std::unordered_map<EndpointId, EndpointRecord> roster_;
        std::unordered_map<EndpointId, UnderlayAddr> attachments_;
    };
}
