#pragma once

#include "amisim/error.hpp"
#include "amisim/rng.hpp"
#include "amisim/simkernel.hpp"

#include <cstddef>
#include <cstdio>
#include <string>
#include <string_view>

namespace amisim {

enum class ServiceState : std::uint8_t { Connected, Disconnected };
enum class ConnectionCommand : std::uint8_t { Connect, Disconnect };

constexpr std::string_view to_string(ServiceState s) noexcept
{
    return s == ServiceState::Connected ? "connected" : "disconnected";
}

constexpr std::string_view to_string(ConnectionCommand c) noexcept
{
    return c == ConnectionCommand::Connect ? "connect" : "disconnect";
}

struct MeterIdentity {
    std::string serial;
    std::size_t house_index = 1;
};

/// One timestamped measurement vector from one meter.
struct MeterReading {
    std::string serial;
    SimTime timestamp_s = 0;
    double voltage_v = 0.0;
    double power_w = 0.0;
    double cumulative_wh = 0.0;
    ServiceState service_state = ServiceState::Connected;

    friend bool operator==(const MeterReading&, const MeterReading&) = default;
};

/// Scalar measurement fields in a reading; the serial is an identifier, not a value.
inline constexpr std::size_t kReadingValueCount = 5;

struct MeterState {
    MeterIdentity identity;
    ServiceState service_state = ServiceState::Connected;
    double cumulative_wh = 0.0;
    SimTime last_sample_t = 0;
    /// Energy has been integrated up to this instant.
    SimTime energy_settled_t = 0;
    SimTime sample_interval_s = 60;
};

inline MeterState make_meter(MeterIdentity identity, SimTime start_t, SimTime sample_interval_s = 60)
{
    if (sample_interval_s < 1) {
        fail(ErrorCode::InvalidArgument, "sample interval must be >= 1 s");
    }
    MeterState state;
    state.identity = std::move(identity);
    state.last_sample_t = start_t;
    state.energy_settled_t = start_t;
    state.sample_interval_s = sample_interval_s;
    return state;
}

/// Opaque grid-wide serial derived from feeder name and house position.
inline std::string make_serial(std::string_view feeder, std::size_t house_index)
{
    Fnv1a64 h;
    h.update(feeder);
    h.update("/");
    h.update(std::to_string(house_index));
    char buf[16];
    std::snprintf(buf, sizeof buf, "SM%08X", static_cast<unsigned>(splitmix64(h.value()) >> 32));
    return buf;
}

/// Power actually drawn given the customer's demand and the service state.
inline double drawn_load(const MeterState& state, double demand_w) noexcept
{
    return state.service_state == ServiceState::Connected ? demand_w : 0.0;
}

/// Integrates energy at constant `load_w` from the last settle point up to t.
inline void settle_energy(MeterState& state, double load_w, SimTime t)
{
    if (t < state.energy_settled_t) {
        fail(ErrorCode::NonMonotonicTime, "settle time precedes last settle");
    }
    const double p = drawn_load(state, load_w);
    state.cumulative_wh += p * static_cast<double>(t - state.energy_settled_t) / 3600.0;
    state.energy_settled_t = t;
}

inline MeterReading read_meter(MeterState& state, double bus_voltage_v, double load_w, SimTime t)
{
    if (t <= state.last_sample_t) {
        fail(ErrorCode::NonMonotonicTime, "sample at t=" + std::to_string(t) +
                                              " not after last sample t=" +
                                              std::to_string(state.last_sample_t));
    }
    if (!(bus_voltage_v > 0.0)) {
        fail(ErrorCode::InvalidArgument, "bus voltage must be positive");
    }
    settle_energy(state, load_w, t);
    state.last_sample_t = t;
    return MeterReading{state.identity.serial, t,           bus_voltage_v, drawn_load(state, load_w),
                        state.cumulative_wh,   state.service_state};
}

/// Idempotent service switch. Energy must be settled by the caller first.
inline MeterState apply_connection_command(MeterState state, ConnectionCommand cmd) noexcept
{
    state.service_state =
        cmd == ConnectionCommand::Connect ? ServiceState::Connected : ServiceState::Disconnected;
    return state;
}

} // namespace amisim
