#pragma once

// Shared fixtures for the unit suites.

#include "amisim/messages.hpp"
#include "amisim/scenario.hpp"

#include <string>

namespace amisim::testing {

inline Message reading_msg(SimTime t = 0, std::string serial = "SM00000001")
{
    return Message{MeterReading{std::move(serial), t, 240.0, 1000.0, 0.0, ServiceState::Connected}};
}

inline Message report_msg(std::string id = "AGG-01")
{
    OperatingStateReport r;
    r.aggregator_id = std::move(id);
    return Message{r};
}

/// One feeder of `houses` homes at `watts` each, one aggregator, short run.
inline std::string small_scenario(std::size_t houses, double watts, SimTime duration = 1800,
                                  SimTime sample = 60, SimTime report = 900)
{
    return "seed = 3\nduration_s = " + std::to_string(duration) +
           "\nsample_interval_s = " + std::to_string(sample) +
           "\nreport_interval_s = " + std::to_string(report) +
           "\n[feeder F1]\nhouse_count = " + std::to_string(houses) +
           "\nload = fixed " + std::to_string(watts) + "\nassign = AGG-01 1-" +
           std::to_string(houses) + "\n";
}

} // namespace amisim::testing
