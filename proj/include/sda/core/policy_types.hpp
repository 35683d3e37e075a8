#pragma once

#include "sda/core/types.hpp"

#include <string>
#include <vector>

namespace sda
{
    enum class Action : std::uint8_t
    {
        Allow,
        Deny,
    };

    const char *action_name(Action a) noexcept;

    /// One cell of a VN's group connectivity matrix.
    struct ConnectivityRule
    {
        Vn vn;
        GroupId src_group;
        GroupId dst_group;
        Action action = Action::Deny;

        friend bool operator==(const ConnectivityRule &, const ConnectivityRule &) = default;
    };

    /// What an edge learns about an endpoint after a successful authentication.
    /// Only rules whose destination is the endpoint's own group are included.
    struct AuthResult
    {
        EndpointId endpoint_id = 0;
        Vn vn;
        GroupId group;
        std::vector<ConnectivityRule> rules;
    };
}
