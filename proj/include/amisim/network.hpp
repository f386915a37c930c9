#pragma once

// Runtime for a whole scenario: one kernel node per meter, per Aggregator and
// for the head-end, plus a fixed agenda of meter sampling instants and report
// instants interleaved with kernel event processing.

#include "amisim/aggregator.hpp"
#include "amisim/error.hpp"
#include "amisim/feeder.hpp"
#include "amisim/headend.hpp"
#include "amisim/messages.hpp"
#include "amisim/metering.hpp"
#include "amisim/rng.hpp"
#include "amisim/scenario.hpp"
#include "amisim/simkernel.hpp"

#include <algorithm>
#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <unordered_map>
#include <vector>

namespace amisim {

/// Raw data volume one Aggregator buffered for one report window.
struct RawTally {
    std::string aggregator_id;
    SimTime window_end_s = 0;
    std::size_t readings = 0;
    std::size_t reading_bytes = 0;
};

inline std::string serialize_reading(const MeterReading& r)
{
    return "serial=" + r.serial + " t=" + std::to_string(r.timestamp_s) +
           " v=" + format_double(r.voltage_v) + " p=" + format_double(r.power_w) +
           " wh=" + format_double(r.cumulative_wh) + " state=" + std::string(to_string(r.service_state));
}

class AmiNetwork {
public:
    struct Meter {
        MeterState state;
        double demand_w = 0.0;
        std::size_t feeder = 0;
        NodeId node;
        std::size_t aggregator = 0;
    };

    struct Feeder {
        std::string name;
        FeederTopology topology;
        /// Meter indices in house order.
        std::vector<std::size_t> meters;
        std::optional<RandomStream> noise;
    };

    struct AggregatorSite {
        Aggregator aggregator;
        NodeId node;
        std::map<std::string, NodeId> meter_nodes;
    };

    explicit AmiNetwork(Scenario scenario) : scenario_(std::move(scenario)), sim_(scenario_.seed)
    {
        validate(scenario_);
        build();
    }

    AmiNetwork(const AmiNetwork&) = delete;
    AmiNetwork& operator=(const AmiNetwork&) = delete;

    const Scenario& scenario() const noexcept { return scenario_; }

    /// Reports for the last window are built once in-flight readings have landed
    /// and are delivered to the head-end by this time.
    SimTime end_time() const noexcept
    {
        return scenario_.duration_s + report_grace() + scenario_.backhaul_link.latency_s +
               scenario_.backhaul_link.jitter_s;
    }

    SimTime report_grace() const noexcept
    {
        return scenario_.meter_link.latency_s + scenario_.meter_link.jitter_s;
    }

    SimTime now() const noexcept { return sim_.now(); }

    /// Processes agenda actions and kernel events up to and including t.
    void advance_to(SimTime t)
    {
        while (next_action_ < agenda_.size() && agenda_[next_action_].time <= t) {
            sim_.run_until(agenda_[next_action_].time);
            perform(agenda_[next_action_++]);
        }
        sim_.run_until(std::max(t, sim_.now()));
    }

    void run() { advance_to(end_time()); }

    /// Head-end billing read through the Aggregator pass-thru.
    CumulativeReading poll_meter(const std::string& aggregator_id, const std::string& serial)
    {
        const AggregatorSite& site = site_for(aggregator_id);
        const std::uint64_t id = next_request_++;
        sim_.send(headend_node_, site.node, Message{PassthruReadRequest{id, serial}});
        while (!read_responses_.contains(id)) {
            advance_one();
        }
        PassthruReadResponse response = std::move(read_responses_.at(id));
        read_responses_.erase(id);
        if (response.error != ErrorCode::None) {
            fail(response.error, "pass-thru read of " + serial + " via " + aggregator_id);
        }
        return *response.reading;
    }

    /// Head-end connect/disconnect command through the Aggregator pass-thru.
    CommandAck command_connection(const std::string& aggregator_id, const std::string& serial,
                                  ConnectionCommand cmd)
    {
        const AggregatorSite& site = site_for(aggregator_id);
        const std::uint64_t id = next_request_++;
        sim_.send(headend_node_, site.node, Message{ConnectCommandRequest{id, serial, cmd}});
        while (!acks_.contains(id)) {
            advance_one();
        }
        CommandAck ack = std::move(acks_.at(id));
        acks_.erase(id);
        if (ack.error != ErrorCode::None) {
            fail(ack.error, "command to " + serial + " via " + aggregator_id);
        }
        return ack;
    }

    const HeadEnd& headend() const noexcept { return headend_; }
    const AmiSimulation& kernel() const noexcept { return sim_; }
    AmiSimulation& kernel() noexcept { return sim_; }

    const std::vector<Meter>& meters() const noexcept { return meters_; }
    const std::vector<Feeder>& feeders() const noexcept { return feeders_; }
    const std::vector<AggregatorSite>& aggregators() const noexcept { return sites_; }
    const std::vector<RawTally>& raw_tallies() const noexcept { return tallies_; }

    const Meter& meter(const std::string& serial) const
    {
        auto it = meter_by_serial_.find(serial);
        if (it == meter_by_serial_.end()) {
            fail(ErrorCode::UnknownMeter, "no meter " + serial);
        }
        return meters_[it->second];
    }

    std::vector<std::string> serials() const
    {
        std::vector<std::string> out;
        out.reserve(meters_.size());
        for (const auto& m : meters_) {
            out.push_back(m.state.identity.serial);
        }
        return out;
    }

    const std::string& aggregator_of(const std::string& serial) const
    {
        return sites_[meter(serial).aggregator].aggregator.id();
    }

    LoadVector drawn_loads(std::size_t feeder) const
    {
        const Feeder& f = feeders_.at(feeder);
        LoadVector loads(f.meters.size());
        for (std::size_t k = 0; k < f.meters.size(); ++k) {
            const Meter& m = meters_[f.meters[k]];
            loads[k] = drawn_load(m.state, m.demand_w);
        }
        return loads;
    }

    VoltageProfile profile(std::size_t feeder) const
    {
        return solve_voltage_profile(feeders_.at(feeder).topology, drawn_loads(feeder));
    }

private:
    enum class ActionKind : std::uint8_t { Report, Sample };

    struct Action {
        SimTime time = 0;
        ActionKind kind = ActionKind::Sample;
        ReportWindow window;
    };

    void build()
    {
        headend_node_ = sim_.add_node(NodeRole::HeadEnd, [this](AmiSimulation&, const auto& ev) {
            on_headend(ev);
        });

        std::map<std::string, std::size_t> site_index;
        std::map<std::string, std::map<std::string, double>> positions;
        std::vector<std::pair<std::size_t, std::string>> meter_owner;

        for (std::size_t fi = 0; fi < scenario_.feeders.size(); ++fi) {
            const FeederSpec& spec = scenario_.feeders[fi];
            Feeder feeder{spec.name, build_feeder(spec.config), {}, std::nullopt};
            if (scenario_.noise_sigma_v > 0.0) {
                feeder.noise = RandomStream::fork(scenario_.seed, "noise:" + spec.name);
            }
            const LoadVector demand = sample_loads(
                spec.load, spec.config.house_count,
                RandomStream::fork(scenario_.seed, "feeder:" + spec.name).next_u64());
            std::vector<std::string> owner(spec.config.house_count + 1);
            for (const auto& a : spec.assignments) {
                for (std::size_t h = a.first_house; h <= a.last_house; ++h) {
                    owner[h] = a.aggregator_id;
                }
            }
            for (std::size_t h = 1; h <= spec.config.house_count; ++h) {
                std::string serial = make_serial(spec.name, h);
                if (meter_by_serial_.contains(serial)) {
                    fail(ErrorCode::ValidationError, "serial collision for " + spec.name + "/" +
                                                         std::to_string(h));
                }
                Meter m;
                m.state = make_meter(MeterIdentity{serial, h}, 0, scenario_.sample_interval_s);
                m.demand_w = demand[h - 1];
                m.feeder = fi;
                const std::size_t index = meters_.size();
                m.node = sim_.add_node(NodeRole::Meter, [this, index](AmiSimulation&, const auto& ev) {
                    on_meter(index, ev);
                });
                positions[owner[h]][serial] = feeder.topology.distance_m(h);
                meter_owner.emplace_back(index, owner[h]);
                meter_by_serial_.emplace(serial, index);
                feeder.meters.push_back(index);
                meters_.push_back(std::move(m));
            }
            for (const auto& a : spec.assignments) {
                if (!site_index.contains(a.aggregator_id)) {
                    site_index.emplace(a.aggregator_id, site_index.size());
                    site_nominal_.push_back(spec.config.source_voltage_v);
                    site_ids_.push_back(a.aggregator_id);
                }
            }
            feeders_.push_back(std::move(feeder));
        }

        sites_.reserve(site_ids_.size());
        for (std::size_t si = 0; si < site_ids_.size(); ++si) {
            const std::string& id = site_ids_[si];
            AggregatorSite site{Aggregator(id, positions.at(id), scenario_.retention_window_s,
                                           site_nominal_[si]),
                                NodeId{}, {}};
            site.node = sim_.add_node(NodeRole::Aggregator, [this, si](AmiSimulation&, const auto& ev) {
                on_aggregator(si, ev);
            });
            sim_.connect_both(site.node, headend_node_, scenario_.backhaul_link);
            sites_.push_back(std::move(site));
        }
        for (const auto& [index, id] : meter_owner) {
            Meter& m = meters_[index];
            m.aggregator = site_index.at(id);
            AggregatorSite& site = sites_[m.aggregator];
            site.meter_nodes.emplace(m.state.identity.serial, m.node);
            sim_.connect_both(m.node, site.node, scenario_.meter_link);
        }

        build_agenda();
    }

    void build_agenda()
    {
        const SimTime duration = scenario_.duration_s;
        for (SimTime t = scenario_.sample_interval_s; t <= duration; t += scenario_.sample_interval_s) {
            agenda_.push_back(Action{t, ActionKind::Sample, {}});
        }
        SimTime start = 0;
        while (start < duration) {
            const SimTime end = std::min(start + scenario_.report_interval_s, duration);
            agenda_.push_back(Action{end + report_grace(), ActionKind::Report, {start, end}});
            start = end;
        }
        std::stable_sort(agenda_.begin(), agenda_.end(), [](const Action& a, const Action& b) {
            return a.time != b.time ? a.time < b.time : a.kind < b.kind;
        });
    }

    /// Processes whichever comes first: the next kernel event or agenda action.
    void advance_one()
    {
        const auto next_event = sim_.next_event_time();
        const bool have_action = next_action_ < agenda_.size();
        if (!next_event && !have_action) {
            fail(ErrorCode::InvalidArgument, "pass-thru request never answered");
        }
        if (next_event && (!have_action || *next_event <= agenda_[next_action_].time)) {
            sim_.step();
            return;
        }
        sim_.run_until(agenda_[next_action_].time);
        perform(agenda_[next_action_++]);
    }

    void perform(const Action& action)
    {
        if (action.kind == ActionKind::Sample) {
            sample_all(action.time);
        } else {
            report_all(action.time, action.window);
        }
    }

    void sample_all(SimTime t)
    {
        for (std::size_t fi = 0; fi < feeders_.size(); ++fi) {
            Feeder& f = feeders_[fi];
            const VoltageProfile profile = solve_voltage_profile(f.topology, drawn_loads(fi));
            for (std::size_t k = 0; k < f.meters.size(); ++k) {
                Meter& m = meters_[f.meters[k]];
                double v = profile.voltage_v[k];
                if (f.noise) {
                    v += f.noise->gaussian(0.0, scenario_.noise_sigma_v);
                }
                MeterReading reading = read_meter(m.state, v, m.demand_w, t);
                sim_.send(m.node, sites_[m.aggregator].node, Message{std::move(reading)});
            }
        }
    }

    void report_all(SimTime t, ReportWindow window)
    {
        for (AggregatorSite& site : sites_) {
            Aggregator& agg = site.aggregator;
            RawTally tally{agg.id(), window.end_s, 0, 0};
            for (const auto& [serial, series] : agg.buffer().series()) {
                for (auto it = series.upper_bound(window.start_s);
                     it != series.end() && it->first <= window.end_s; ++it) {
                    ++tally.readings;
                    tally.reading_bytes += serialize_reading(it->second).size() + 1;
                }
            }
            tallies_.push_back(std::move(tally));
            agg.buffer().evict_expired(t);
            try {
                sim_.send(site.node, headend_node_, Message{agg.report(window)});
            } catch (const Error& e) {
                if (e.code() != ErrorCode::NoData) {
                    throw;
                }
            }
        }
    }

    void on_meter(std::size_t index, const AmiSimulation::EventType& ev)
    {
        Meter& m = meters_[index];
        if (const auto* cmd = std::get_if<ConnectCommandRequest>(&ev.payload.body)) {
            settle_energy(m.state, m.demand_w, sim_.now());
            m.state = apply_connection_command(m.state, cmd->command);
            sim_.send(m.node, ev.source,
                      Message{CommandAck{cmd->request_id, cmd->serial, m.state.service_state,
                                         ErrorCode::None}});
        }
    }

    void on_aggregator(std::size_t si, const AmiSimulation::EventType& ev)
    {
        AggregatorSite& site = sites_[si];
        std::visit(
            [&](const auto& body) {
                using T = std::decay_t<decltype(body)>;
                if constexpr (std::is_same_v<T, MeterReading>) {
                    site.aggregator.ingest(body);
                } else if constexpr (std::is_same_v<T, PassthruReadRequest>) {
                    PassthruReadResponse response{body.request_id, std::nullopt, ErrorCode::None};
                    try {
                        response.reading = site.aggregator.passthru_read(body.serial);
                    } catch (const Error& e) {
                        response.error = e.code();
                    }
                    sim_.send(site.node, headend_node_, Message{std::move(response)});
                } else if constexpr (std::is_same_v<T, ConnectCommandRequest>) {
                    auto target = site.meter_nodes.find(body.serial);
                    if (target == site.meter_nodes.end()) {
                        sim_.send(site.node, headend_node_,
                                  Message{CommandAck{body.request_id, body.serial,
                                                     ServiceState::Connected,
                                                     ErrorCode::UnknownMeter}});
                    } else {
                        sim_.send(site.node, target->second, Message{body});
                    }
                } else if constexpr (std::is_same_v<T, CommandAck>) {
                    sim_.send(site.node, headend_node_, Message{body});
                }
            },
            ev.payload.body);
    }

    void on_headend(const AmiSimulation::EventType& ev)
    {
        if (const auto* report = std::get_if<OperatingStateReport>(&ev.payload.body)) {
            headend_.receive_report(*report);
        } else if (const auto* response = std::get_if<PassthruReadResponse>(&ev.payload.body)) {
            read_responses_.emplace(response->request_id, *response);
        } else if (const auto* ack = std::get_if<CommandAck>(&ev.payload.body)) {
            acks_.emplace(ack->request_id, *ack);
        }
    }

    const AggregatorSite& site_for(const std::string& aggregator_id) const
    {
        for (const auto& site : sites_) {
            if (site.aggregator.id() == aggregator_id) {
                return site;
            }
        }
        fail(ErrorCode::UnknownAggregator, "no aggregator '" + aggregator_id + "'");
    }

    Scenario scenario_;
    AmiSimulation sim_;
    NodeId headend_node_;
    HeadEnd headend_;
    std::vector<Meter> meters_;
    std::vector<Feeder> feeders_;
    std::vector<AggregatorSite> sites_;
    std::vector<std::string> site_ids_;
    std::vector<double> site_nominal_;
    std::unordered_map<std::string, std::size_t> meter_by_serial_;
    std::vector<Action> agenda_;
    std::size_t next_action_ = 0;
    std::uint64_t next_request_ = 0;
    std::map<std::uint64_t, PassthruReadResponse> read_responses_;
    std::map<std::uint64_t, CommandAck> acks_;
    std::vector<RawTally> tallies_;
};

} // namespace amisim
