#include "sda/policy/policy_server.hpp"

#include <stdexcept>

namespace sda
{
    void PolicyServer::add_endpoint(EndpointRecord record)
    {
        record.validate();
        const EndpointId id = record.endpoint_id;
        roster_[id] = std::move(record);
    }

    const EndpointRecord *PolicyServer::endpoint(EndpointId id) const
    {
        auto it = roster_.find(id);
        return it == roster_.end() ? nullptr : &it->second;
    }

    void PolicyServer::load_rule(const ConnectivityRule &rule)
    {
        rules_[key_of(rule)] = rule.action;
        ++version_;
    }

    AuthResult PolicyServer::make_result(const EndpointRecord &rec) const
    {
        return AuthResult{rec.endpoint_id, rec.vn, rec.group, rules_for_destination_group(rec.vn, rec.group)};
    }

    AuthOutcome PolicyServer::authenticate(EndpointId id, const std::string &token) const
    {
        const EndpointRecord *rec = endpoint(id);
        if (!rec)
            return AuthFailure{id, "unknown endpoint"};
        if (rec->auth_token != token)
            return AuthFailure{id, "bad credentials"};
        return make_result(*rec);
    }

    std::vector<ConnectivityRule> PolicyServer::rules_for_destination_group(Vn vn, GroupId dst) const
    {
        std::vector<ConnectivityRule> out;
        auto it = rules_.lower_bound({vn.value(), dst.value(), 0});
        for (; it != rules_.end(); ++it)
        {
            const auto &[kvn, kdst, ksrc] = it->first;
            if (kvn != vn.value() || kdst != dst.value())
                break;
            out.push_back({vn, GroupId(ksrc), dst, it->second});
        }
        return out;
    }

    Action PolicyServer::evaluate(Vn vn, GroupId src, GroupId dst) const
    {
        auto it = rules_.find({vn.value(), dst.value(), src.value()});
        return it == rules_.end() ? default_action_ : it->second;
    }

    std::set<UnderlayAddr> PolicyServer::edges_hosting(Vn vn, GroupId group) const
    {
        std::set<UnderlayAddr> edges;
        for (const auto &[id, edge] : attachments_)
        {
            const EndpointRecord &rec = roster_.at(id);
            if (rec.vn == vn && rec.group == group)
                edges.insert(edge);
        }
        return edges;
    }

    MatrixUpdateOutcome PolicyServer::update_matrix(const MatrixChange &change, std::vector<ControlOut> &out)
    {
        const ConnectivityRule &r = change.rule;
        const RuleKey k = key_of(r);
        auto it = rules_.find(k);
        bool changed = false;
        switch (change.op)
        {
        case MatrixChange::Op::Add:
            if (it == rules_.end())
            {
                rules_.emplace(k, r.action);
                changed = true;
            }
            else if (it->second != r.action)
            {
                it->second = r.action;
                changed = true;
            }
            break;
        case MatrixChange::Op::Remove:
            if (it != rules_.end())
            {
                rules_.erase(it);
                changed = true;
            }
            break;
        case MatrixChange::Op::Flip:
            if (it != rules_.end())
            {
                it->second = it->second == Action::Allow ? Action::Deny : Action::Allow;
                changed = true;
            }
            break;
        }

        MatrixUpdateOutcome outcome;
        if (!changed)
        {
            outcome.version = version_;
            return outcome;
        }
        outcome.version = ++version_;
        outcome.changed = true;
        outcome.affected_edges = edges_hosting(r.vn, r.dst_group);
        if (!outcome.affected_edges.empty())
        {
            RuleDownloadBody body{r.vn, r.dst_group, rules_for_destination_group(r.vn, r.dst_group), version_};
            for (UnderlayAddr edge : outcome.affected_edges)
                out.push_back({edge, {self_, 0, body}});
        }
        return outcome;
    }

    std::size_t PolicyServer::reassign_group(EndpointId id, GroupId new_group, std::vector<ControlOut> &out)
    {
        auto it = roster_.find(id);
        if (it == roster_.end())
        {
            throw std::invalid_argument("reassign_group: unknown endpoint " + std::to_string(id));
        }
        EndpointRecord &rec = it->second;
        if (rec.group == new_group)
            return 0;
        rec.group = new_group;
        auto at = attachments_.find(id);
        if (at == attachments_.end())
            return 0;
        AuthReplyBody reply{id, true, make_result(rec), true};
        out.push_back({at->second, {self_, 0, std::move(reply)}});
        return 1;
    }

    void PolicyServer::handle(const ControlMessage &msg, std::vector<ControlOut> &out)
    {
        const auto *req = std::get_if<AuthRequestBody>(&msg.body);
        if (!req)
            return;
        AuthOutcome outcome = authenticate(req->endpoint_id, req->auth_token);
        AuthReplyBody reply;
        reply.endpoint_id = req->endpoint_id;
        if (auto *ok = std::get_if<AuthResult>(&outcome))
        {
            reply.success = true;
            reply.result = std::move(*ok);
            attachments_[req->endpoint_id] = msg.from;
        }
        out.push_back({msg.from, {self_, msg.cause, std::move(reply)}});
    }

    void PolicyServer::session_ended(EndpointId id, UnderlayAddr edge)
    {
        auto it = attachments_.find(id);
        if (it != attachments_.end() && it->second == edge)
            attachments_.erase(it);
    }

    std::optional<UnderlayAddr> PolicyServer::attachment(EndpointId id) const
    {
        auto it = attachments_.find(id);
        if (it == attachments_.end())
            return std::nullopt;
        return it->second;
    }
}
