#include "amisim/metering.hpp"
#include "amisim/rng.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <set>

using namespace amisim;

namespace {

MeterState fresh() { return make_meter(MeterIdentity{"SM0000ABCD", 7}, 0, 60); }

} // namespace

TEST(ReadMeter, ConnectedEnergyAccrues)
{
    MeterState m = fresh();
    const MeterReading r = read_meter(m, 238.5, 5'000.0, 60);
    EXPECT_NEAR(r.cumulative_wh, 5'000.0 * 60.0 / 3600.0, 1e-12);
    EXPECT_EQ(r.power_w, 5'000.0);
    EXPECT_EQ(r.voltage_v, 238.5);
    EXPECT_EQ(r.serial, "SM0000ABCD");
    EXPECT_EQ(r.service_state, ServiceState::Connected);
}

TEST(ReadMeter, DisconnectedDrawsNothing)
{
    MeterState m = apply_connection_command(fresh(), ConnectionCommand::Disconnect);
    const MeterReading r = read_meter(m, 240.0, 5'000.0, 60);
    EXPECT_EQ(r.power_w, 0.0);
    EXPECT_EQ(r.cumulative_wh, 0.0);
    EXPECT_EQ(r.service_state, ServiceState::Disconnected);
}

TEST(ReadMeter, RepeatedTimestampRejected)
{
    MeterState m = fresh();
    read_meter(m, 240.0, 100.0, 60);
    try {
        read_meter(m, 240.0, 100.0, 60);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::NonMonotonicTime);
    }
    EXPECT_THROW(read_meter(m, 0.0, 100.0, 120), Error);
}

TEST(ConnectionCommand, DisconnectZeroesDrawnLoad)
{
    const MeterState off = apply_connection_command(fresh(), ConnectionCommand::Disconnect);
    EXPECT_EQ(off.service_state, ServiceState::Disconnected);
    EXPECT_EQ(drawn_load(off, 10'000.0), 0.0);
}

TEST(ConnectionCommand, ConnectIsIdempotent)
{
    const MeterState on = fresh();
    const MeterState again = apply_connection_command(on, ConnectionCommand::Connect);
    EXPECT_EQ(again.service_state, on.service_state);
    EXPECT_EQ(again.cumulative_wh, on.cumulative_wh);
}

TEST(ConnectionCommand, GapPreservesCumulative)
{
    MeterState m = fresh();
    read_meter(m, 240.0, 3'600.0, 600);
    settle_energy(m, 3'600.0, 900);
    m = apply_connection_command(m, ConnectionCommand::Disconnect);
    const double at_cut = m.cumulative_wh;
    EXPECT_NEAR(at_cut, 900.0, 1e-9);
    const MeterReading during = read_meter(m, 240.0, 3'600.0, 2'400);
    EXPECT_EQ(during.cumulative_wh, at_cut);
    settle_energy(m, 3'600.0, 3'000);
    m = apply_connection_command(m, ConnectionCommand::Connect);
    const MeterReading after = read_meter(m, 240.0, 3'600.0, 3'600);
    EXPECT_NEAR(after.cumulative_wh, 900.0 + 600.0, 1e-9);
}

TEST(EnergyProperty, CumulativeMatchesConnectedIntegral)
{
    // Randomized connect/disconnect sequences against an independent integral.
    auto rng = RandomStream::fork(77, "meter-energy");
    for (int trial = 0; trial < 1000; ++trial) {
        MeterState m = fresh();
        const double load = rng.uniform(0.0, 12'000.0);
        bool connected = true;
        SimTime t = 0;
        SimTime last_t = 0;
        double connected_seconds = 0.0;
        double previous = 0.0;
        for (int step = 0; step < 60; ++step) {
            t += 1 + static_cast<SimTime>(rng.uniform_int(300));
            if (connected) {
                connected_seconds += static_cast<double>(t - last_t);
            }
            last_t = t;
            if (rng.uniform_int(3) == 0) {
                settle_energy(m, load, t);
                connected = !connected;
                m = apply_connection_command(m, connected ? ConnectionCommand::Connect
                                                          : ConnectionCommand::Disconnect);
            } else {
                const MeterReading r = read_meter(m, 240.0, load, t);
                ASSERT_GE(r.cumulative_wh, previous);
                previous = r.cumulative_wh;
            }
        }
        settle_energy(m, load, t);
        const double expected = load * connected_seconds / 3600.0;
        ASSERT_NEAR(m.cumulative_wh, expected, 1e-6 * std::max(1.0, expected)) << "trial " << trial;
    }
}

TEST(Serial, StableAndDistinct)
{
    EXPECT_EQ(make_serial("F1", 1), make_serial("F1", 1));
    std::set<std::string> seen;
    for (std::size_t h = 1; h <= 1000; ++h) {
        const auto s = make_serial("F01", h);
        EXPECT_EQ(s.size(), 10u);
        EXPECT_EQ(s.rfind("SM", 0), 0u);
        seen.insert(s);
    }
    EXPECT_EQ(seen.size(), 1000u);
}
