#pragma once

// Deterministic discrete-event kernel: integer-second clock, (fire_at, seq)
// ordered event queue, and a directed link table with seeded jitter.

#include "amisim/error.hpp"
#include "amisim/rng.hpp"

#include <algorithm>
#include <compare>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

namespace amisim {

/// Simulated seconds.
using SimTime = std::int64_t;

enum class NodeRole : std::uint8_t { Meter, Aggregator, HeadEnd };

constexpr std::string_view to_string(NodeRole role) noexcept
{
    switch (role) {
    case NodeRole::Meter: return "meter";
    case NodeRole::Aggregator: return "aggregator";
    case NodeRole::HeadEnd: return "headend";
    }
    return "?";
}

struct NodeId {
    std::uint32_t value = 0;
    friend auto operator<=>(const NodeId&, const NodeId&) = default;
};

struct LinkProfile {
    SimTime latency_s = 1;
    SimTime jitter_s = 0;
};

template <class Payload>
struct Event {
    SimTime fire_at = 0;
    std::uint64_t seq = 0;
    NodeId source;
    NodeId target;
    Payload payload;
};

/// A payload type must provide `payload.kind()` whose result has an ADL
/// `to_string`, and an ADL `permits(payload, from_role, to_role)` that encodes
/// the allowed dataflow directions.
template <class Payload>
concept RoutablePayload = requires(const Payload& p, NodeRole r) {
    { to_string(p.kind()) } -> std::convertible_to<std::string_view>;
    { permits(p, r, r) } -> std::convertible_to<bool>;
};

template <RoutablePayload Payload>
class Simulation {
public:
    using EventType = Event<Payload>;
    using Handler = std::function<void(Simulation&, const EventType&)>;

    explicit Simulation(std::uint64_t seed = 0) : seed_(seed) {}

    Simulation(const Simulation&) = delete;
    Simulation& operator=(const Simulation&) = delete;
    Simulation(Simulation&&) = default;
    Simulation& operator=(Simulation&&) = default;

    NodeId add_node(NodeRole role, Handler handler = {})
    {
        NodeId id{static_cast<std::uint32_t>(nodes_.size())};
        nodes_.push_back(Node{role, std::move(handler)});
        return id;
    }

    void set_handler(NodeId id, Handler handler) { node(id).handler = std::move(handler); }

    NodeRole role(NodeId id) const { return node(id).role; }

    std::size_t node_count() const noexcept { return nodes_.size(); }

    /// Directed link from -> to.
    void connect(NodeId from, NodeId to, LinkProfile profile)
    {
        if (profile.latency_s < 0 || profile.jitter_s < 0) {
            fail(ErrorCode::InvalidArgument, "link latency and jitter must be non-negative");
        }
        node(from);
        node(to);
        links_[{from.value, to.value}] = Link{profile, std::nullopt};
    }

    void connect_both(NodeId a, NodeId b, LinkProfile profile)
    {
        connect(a, b, profile);
        connect(b, a, profile);
    }

    bool has_link(NodeId from, NodeId to) const
    {
        return links_.contains({from.value, to.value});
    }

    SimTime now() const noexcept { return now_; }

    /// Enqueues an event and returns its ordinal. Equal fire times dequeue in
    /// ordinal order.
    std::uint64_t schedule(SimTime fire_at, NodeId source, NodeId target, Payload payload)
    {
        if (fire_at < now_) {
            fail(ErrorCode::PastEvent, "fire_at " + std::to_string(fire_at) + " precedes clock " +
                                           std::to_string(now_));
        }
        node(target);
        const std::uint64_t seq = next_seq_++;
        queue_.push_back(EventType{fire_at, seq, source, target, std::move(payload)});
        std::push_heap(queue_.begin(), queue_.end(), Later{});
        return seq;
    }

    /// Routes a message over the (from, to) link: delivery at
    /// now + latency + seeded jitter draw.
    std::uint64_t send(NodeId from, NodeId to, Payload payload)
    {
        if (!permits(payload, role(from), role(to))) {
            fail(ErrorCode::InvalidDirection,
                 std::string(to_string(payload.kind())) + " may not flow " +
                     std::string(to_string(role(from))) + " -> " + std::string(to_string(role(to))));
        }
        auto it = links_.find({from.value, to.value});
        if (it == links_.end()) {
            fail(ErrorCode::NoRoute, "no link " + std::to_string(from.value) + " -> " +
                                         std::to_string(to.value));
        }
        Link& link = it->second;
        SimTime delay = link.profile.latency_s;
        if (link.profile.jitter_s > 0) {
            if (!link.jitter) {
                link.jitter = RandomStream::fork(
                    seed_, "link:" + std::to_string(from.value) + "->" + std::to_string(to.value));
            }
            delay += static_cast<SimTime>(
                link.jitter->uniform_int(static_cast<std::uint64_t>(link.profile.jitter_s)));
        }
        ++sent_;
        return schedule(now_ + delay, from, to, std::move(payload));
    }

    std::optional<SimTime> next_event_time() const
    {
        if (queue_.empty()) {
            return std::nullopt;
        }
        return queue_.front().fire_at;
    }

    /// Processes the single earliest event, advancing the clock to its time.
    bool step()
    {
        if (queue_.empty()) {
            return false;
        }
        std::pop_heap(queue_.begin(), queue_.end(), Later{});
        EventType ev = std::move(queue_.back());
        queue_.pop_back();
        dispatch(ev);
        return true;
    }

    /// Processes every event with fire_at <= t_end, then sets the clock to t_end.
    std::size_t run_until(SimTime t_end)
    {
        if (t_end < now_) {
            fail(ErrorCode::InvalidArgument, "run_until target precedes clock");
        }
        std::size_t processed = 0;
        while (!queue_.empty() && queue_.front().fire_at <= t_end) {
            step();
            ++processed;
        }
        now_ = t_end;
        return processed;
    }

    std::size_t pending() const noexcept { return queue_.size(); }
    std::uint64_t processed_total() const noexcept { return processed_; }
    std::uint64_t sent_total() const noexcept { return sent_; }

    std::uint64_t processed_of(std::string_view kind) const
    {
        auto it = kind_counts_.find(kind);
        return it == kind_counts_.end() ? 0 : it->second;
    }

    const std::map<std::string_view, std::uint64_t, std::less<>>& kind_counts() const noexcept
    {
        return kind_counts_;
    }

    /// FNV-1a over the ordered event-log lines, whether or not a log sink is set.
    std::uint64_t digest() const noexcept { return digest_.value(); }

    void set_event_log(std::ostream* sink) noexcept { log_ = sink; }

    std::uint64_t seed() const noexcept { return seed_; }

private:
    struct Node {
        NodeRole role;
        Handler handler;
    };

    struct Link {
        LinkProfile profile;
        std::optional<RandomStream> jitter;
    };

    struct Later {
        bool operator()(const EventType& a, const EventType& b) const noexcept
        {
            return std::tie(a.fire_at, a.seq) > std::tie(b.fire_at, b.seq);
        }
    };

    Node& node(NodeId id)
    {
        if (id.value >= nodes_.size()) {
            fail(ErrorCode::InvalidArgument, "unknown node " + std::to_string(id.value));
        }
        return nodes_[id.value];
    }

    const Node& node(NodeId id) const
    {
        if (id.value >= nodes_.size()) {
            fail(ErrorCode::InvalidArgument, "unknown node " + std::to_string(id.value));
        }
        return nodes_[id.value];
    }

    void dispatch(const EventType& ev)
    {
        now_ = ev.fire_at;
        const std::string_view kind = to_string(ev.payload.kind());
        std::string line = "t=" + std::to_string(ev.fire_at) + " seq=" + std::to_string(ev.seq) +
                           " kind=" + std::string(kind) + " from=" + std::to_string(ev.source.value) +
                           " to=" + std::to_string(ev.target.value) + "\n";
        digest_.update(line);
        if (log_ != nullptr) {
            *log_ << line;
        }
        ++processed_;
        ++kind_counts_[kind];
        Node& target = nodes_[ev.target.value];
        if (target.handler) {
            target.handler(*this, ev);
        }
    }

    std::uint64_t seed_;
    SimTime now_ = 0;
    std::uint64_t next_seq_ = 0;
    std::uint64_t processed_ = 0;
    std::uint64_t sent_ = 0;
    std::vector<EventType> queue_;
    std::vector<Node> nodes_;
    std::map<std::pair<std::uint32_t, std::uint32_t>, Link> links_;
    std::map<std::string_view, std::uint64_t, std::less<>> kind_counts_;
    Fnv1a64 digest_;
    std::ostream* log_ = nullptr;
};

} // namespace amisim
