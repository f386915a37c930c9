#pragma once

#include "amisim/aggregator.hpp"
#include "amisim/metering.hpp"
#include "amisim/simkernel.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

namespace amisim {

enum class MessageKind : std::uint8_t {
    ReadingBroadcast,
    Report,
    PassthruReadRequest,
    PassthruReadResponse,
    ConnectCommand,
    CommandAck,
};

constexpr std::string_view to_string(MessageKind kind) noexcept
{
    switch (kind) {
    case MessageKind::ReadingBroadcast: return "ReadingBroadcast";
    case MessageKind::Report: return "Report";
    case MessageKind::PassthruReadRequest: return "PassthruReadRequest";
    case MessageKind::PassthruReadResponse: return "PassthruReadResponse";
    case MessageKind::ConnectCommand: return "ConnectCommand";
    case MessageKind::CommandAck: return "CommandAck";
    }
    return "?";
}

struct PassthruReadRequest {
    std::uint64_t request_id = 0;
    std::string serial;
};

struct PassthruReadResponse {
    std::uint64_t request_id = 0;
    std::optional<CumulativeReading> reading;
    ErrorCode error = ErrorCode::None;
};

struct ConnectCommandRequest {
    std::uint64_t request_id = 0;
    std::string serial;
    ConnectionCommand command = ConnectionCommand::Connect;
};

/// Alternatives are declared in MessageKind order.
using MessageBody = std::variant<MeterReading, OperatingStateReport, PassthruReadRequest,
                                 PassthruReadResponse, ConnectCommandRequest, CommandAck>;

struct Message {
    MessageBody body;

    MessageKind kind() const noexcept { return static_cast<MessageKind>(body.index()); }
};

/// Allowed dataflow: readings meter -> aggregator, reports aggregator ->
/// head-end, pass-thru requests head-end -> aggregator (-> meter) with
/// responses and acks travelling back the same way.
constexpr bool permits(MessageKind kind, NodeRole from, NodeRole to) noexcept
{
    using R = NodeRole;
    switch (kind) {
    case MessageKind::ReadingBroadcast: return from == R::Meter && to == R::Aggregator;
    case MessageKind::Report: return from == R::Aggregator && to == R::HeadEnd;
    case MessageKind::PassthruReadRequest: return from == R::HeadEnd && to == R::Aggregator;
    case MessageKind::PassthruReadResponse: return from == R::Aggregator && to == R::HeadEnd;
    case MessageKind::ConnectCommand:
        return (from == R::HeadEnd && to == R::Aggregator) ||
               (from == R::Aggregator && to == R::Meter);
    case MessageKind::CommandAck:
        return (from == R::Meter && to == R::Aggregator) ||
               (from == R::Aggregator && to == R::HeadEnd);
    }
    return false;
}

inline bool permits(const Message& msg, NodeRole from, NodeRole to) noexcept
{
    return permits(msg.kind(), from, to);
}

using AmiSimulation = Simulation<Message>;

} // namespace amisim
