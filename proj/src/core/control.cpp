#include "sda/core/control.hpp"

namespace sda
{
    std::string_view msg_kind_name(MsgKind k) noexcept
    {
        switch (k)
        {
        case MsgKind::MapRequest:
            return "MapRequest";
        case MsgKind::MapReply:
            return "MapReply";
        case MsgKind::NegativeMapReply:
            return "NegativeMapReply";
        case MsgKind::MapRegister:
            return "MapRegister";
        case MsgKind::SolicitUpdate:
            return "SolicitUpdate";
        case MsgKind::SubscribeUpdate:
            return "SubscribeUpdate";
        case MsgKind::AuthRequest:
            return "AuthRequest";
        case MsgKind::AuthReply:
            return "AuthReply";
        case MsgKind::RuleDownload:
            return "RuleDownload";
        case MsgKind::ProactivePush:
            return "ProactivePush";
        }
        return "?";
    }

    const char *action_name(Action a) noexcept
    {
        return a == Action::Allow ? "allow" : "deny";
    }
}
