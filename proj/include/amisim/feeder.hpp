#pragma once

// Single-phase radial feeder: a trunk run from the grid connection to the
// first house, then equally spaced houses. Loads are constant-current at
// nominal voltage, so the profile is linear in the load vector.

#include "amisim/error.hpp"
#include "amisim/rng.hpp"

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace amisim {

/// Series resistance per metre such that `house_count` houses each drawing
/// `per_house_w` at constant current end at `end_voltage_v`.
///
/// Drop at the last house is r * I * (trunk * N + spacing * sum_{j=1}^{N-1} (N - j)).
inline double calibrated_resistance(double source_voltage_v, double trunk_length_m,
                                    double spacing_m, std::size_t house_count,
                                    double per_house_w, double end_voltage_v)
{
    const double current = per_house_w / source_voltage_v;
    const double n = static_cast<double>(house_count);
    const double weighted_length = trunk_length_m * n + spacing_m * n * (n - 1.0) / 2.0;
    return (source_voltage_v - end_voltage_v) / (current * weighted_length);
}

/// 240 V, 500 m trunk, 50 m spacing, 100 houses at 10 kW ending at 225 V.
inline double default_resistance_ohm_per_m()
{
    return calibrated_resistance(240.0, 500.0, 50.0, 100, 10'000.0, 225.0);
}

struct FeederConfig {
    double source_voltage_v = 240.0;
    double trunk_length_m = 500.0;
    double spacing_m = 50.0;
    std::size_t house_count = 100;
    /// Unset means the calibrated default.
    std::optional<double> resistance_ohm_per_m;
};

struct FeederTopology {
    double source_voltage_v = 240.0;
    double trunk_length_m = 500.0;
    double spacing_m = 50.0;
    std::size_t house_count = 1;
    double resistance_ohm_per_m = 0.0;

    /// Distance of house k (1-based) from the grid connection.
    double distance_m(std::size_t house_index) const noexcept
    {
        return trunk_length_m + static_cast<double>(house_index - 1) * spacing_m;
    }

    std::vector<double> distances() const
    {
        std::vector<double> out(house_count);
        for (std::size_t k = 1; k <= house_count; ++k) {
            out[k - 1] = distance_m(k);
        }
        return out;
    }
};

inline FeederTopology build_feeder(const FeederConfig& config)
{
    if (config.house_count == 0) {
        fail(ErrorCode::EmptyFeeder, "feeder has no houses");
    }
    if (!(config.source_voltage_v > 0.0)) {
        fail(ErrorCode::InvalidDimension, "source voltage must be positive");
    }
    if (!(config.spacing_m > 0.0)) {
        fail(ErrorCode::InvalidDimension, "house spacing must be positive");
    }
    if (!(config.trunk_length_m >= 0.0)) {
        fail(ErrorCode::InvalidDimension, "trunk length must be non-negative");
    }
    const double r = config.resistance_ohm_per_m.value_or(default_resistance_ohm_per_m());
    if (!(r > 0.0) || !std::isfinite(r)) {
        fail(ErrorCode::InvalidDimension, "resistance must be positive");
    }
    return FeederTopology{config.source_voltage_v, config.trunk_length_m, config.spacing_m,
                          config.house_count, r};
}

struct FixedLoad {
    double watts = 0.0;
    friend bool operator==(const FixedLoad&, const FixedLoad&) = default;
};

struct UniformLoad {
    double min_w = 0.0;
    double max_w = 0.0;
    friend bool operator==(const UniformLoad&, const UniformLoad&) = default;
};

using LoadModel = std::variant<FixedLoad, UniformLoad>;

/// Per-house real power demand in watts, index 0 = house 1.
using LoadVector = std::vector<double>;

inline void validate(const LoadModel& model)
{
    if (const auto* fixed = std::get_if<FixedLoad>(&model)) {
        if (!(fixed->watts >= 0.0)) {
            fail(ErrorCode::InvalidArgument, "fixed load must be non-negative");
        }
    } else {
        const auto& u = std::get<UniformLoad>(model);
        if (!(u.min_w >= 0.0 && u.min_w <= u.max_w)) {
            fail(ErrorCode::InvalidArgument, "uniform load requires 0 <= min <= max");
        }
    }
}

inline LoadVector sample_loads(const LoadModel& model, std::size_t house_count, std::uint64_t seed)
{
    validate(model);
    if (house_count == 0) {
        fail(ErrorCode::EmptyFeeder, "cannot sample loads for zero houses");
    }
    if (const auto* fixed = std::get_if<FixedLoad>(&model)) {
        return LoadVector(house_count, fixed->watts);
    }
    const auto& u = std::get<UniformLoad>(model);
    auto rng = RandomStream::fork(seed, "loads");
    LoadVector out(house_count);
    for (auto& w : out) {
        w = rng.uniform(u.min_w, u.max_w);
    }
    return out;
}

struct VoltageProfile {
    std::vector<double> distance_m;
    std::vector<double> voltage_v;

    std::size_t size() const noexcept { return voltage_v.size(); }
};

/// House current I_k = P_k / V_source; segment j carries the currents of all
/// houses at or beyond j; voltage accumulates the series drops.
inline VoltageProfile solve_voltage_profile(const FeederTopology& topology,
                                            std::span<const double> loads_w)
{
    const std::size_t n = topology.house_count;
    if (loads_w.size() != n) {
        fail(ErrorCode::DimensionMismatch, "load vector has " + std::to_string(loads_w.size()) +
                                               " entries for " + std::to_string(n) + " houses");
    }
    std::vector<double> downstream(n + 1, 0.0);
    for (std::size_t k = n; k-- > 0;) {
        if (!(loads_w[k] >= 0.0)) {
            fail(ErrorCode::InvalidArgument, "negative load at house " + std::to_string(k + 1));
        }
        downstream[k] = downstream[k + 1] + loads_w[k] / topology.source_voltage_v;
    }
    VoltageProfile profile;
    profile.distance_m = topology.distances();
    profile.voltage_v.resize(n);
    double v = topology.source_voltage_v;
    for (std::size_t k = 0; k < n; ++k) {
        const double length = k == 0 ? topology.trunk_length_m : topology.spacing_m;
        v -= length * topology.resistance_ohm_per_m * downstream[k];
        profile.voltage_v[k] = v;
    }
    return profile;
}

} // namespace amisim
