#include "amisim/aggregator.hpp"
#include "amisim/feeder.hpp"
#include "amisim/rng.hpp"

#include <gtest/gtest.h>

#include <map>
#include <set>
#include <string>
#include <vector>

using namespace amisim;

namespace {

MeterReading reading(std::string serial, SimTime t, double v = 240.0, double p = 1'000.0,
                     double wh = 0.0)
{
    return MeterReading{std::move(serial), t, v, p, wh, ServiceState::Connected};
}

struct FlatGroup {
    std::map<std::string, double> positions;
    RawDataBuffer buffer;

    explicit FlatGroup(std::size_t n = 100, double watts = 10'000.0, SimTime t = 900)
    {
        FeederConfig c;
        c.house_count = n;
        const FeederTopology topo = build_feeder(c);
        const auto profile = solve_voltage_profile(topo, std::vector<double>(n, watts));
        std::set<std::string> group;
        for (std::size_t k = 0; k < n; ++k) {
            const std::string serial = "m" + std::to_string(k + 1);
            positions[serial] = profile.distance_m[k];
            group.insert(serial);
        }
        buffer = RawDataBuffer(group, 7'200);
        for (std::size_t k = 0; k < n; ++k) {
            buffer.ingest(reading("m" + std::to_string(k + 1), t, profile.voltage_v[k], watts));
        }
    }
};

} // namespace

TEST(Ingest, StoreAndRetrieve)
{
    RawDataBuffer b({"a", "b"}, 3'600);
    ingest_reading(b, reading("a", 10));
    ASSERT_NE(b.find("a", 10), nullptr);
    EXPECT_EQ(b.find("a", 11), nullptr);
    EXPECT_EQ(b.size(), 1u);
}

TEST(Ingest, DuplicateLastWriterWins)
{
    RawDataBuffer b({"a"}, 3'600);
    b.ingest(reading("a", 10, 240.0, 1.0));
    b.ingest(reading("a", 10, 239.0, 2.0));
    EXPECT_EQ(b.size(), 1u);
    EXPECT_EQ(b.find("a", 10)->power_w, 2.0);
}

TEST(Ingest, ForeignMeterRejected)
{
    RawDataBuffer b({"a"}, 3'600);
    try {
        b.ingest(reading("z", 10));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ForeignMeter);
    }
}

TEST(Evict, ExpiredReadingRemoved)
{
    RawDataBuffer b({"a"}, 3'600);
    b.ingest(reading("a", 0));
    EXPECT_EQ(evict_expired(b, 3'601), 1u);
    EXPECT_TRUE(b.empty());
}

TEST(Evict, FreshAndEmptyBuffersUntouched)
{
    RawDataBuffer b({"a"}, 3'600);
    EXPECT_EQ(evict_expired(b, 100), 0u);
    b.ingest(reading("a", 50));
    b.ingest(reading("a", 60));
    EXPECT_EQ(evict_expired(b, 3'650), 0u);
    EXPECT_EQ(b.size(), 2u);
}

TEST(RetentionProperty, NoRetainedReadingOlderThanWindow)
{
    // 10 000 random ingest/evict sequences; oldest age checked after every eviction.
    auto rng = RandomStream::fork(99, "retention");
    for (int seq = 0; seq < 10'000; ++seq) {
        const SimTime retention = 1 + static_cast<SimTime>(rng.uniform_int(7'200));
        std::set<std::string> group{"a", "b", "c"};
        RawDataBuffer b(group, retention);
        SimTime now = 0;
        const std::size_t ops = 5 + rng.uniform_int(25);
        for (std::size_t op = 0; op < ops; ++op) {
            now += static_cast<SimTime>(rng.uniform_int(1'800));
            if (rng.uniform_int(2) == 0) {
                const char* serials[] = {"a", "b", "c"};
                b.ingest(reading(serials[rng.uniform_int(2)], now));
            } else {
                b.evict_expired(now);
                for (const auto& [serial, series] : b.series()) {
                    for (const auto& [t, r] : series) {
                        ASSERT_LE(now - t, retention) << "sequence " << seq;
                    }
                }
            }
        }
    }
}

TEST(BuildReport, FlatHundredMeterWindow)
{
    FlatGroup g;
    const auto r = build_report(g.buffer, ReportWindow{0, 900}, g.positions, "AGG-01", 240.0);
    EXPECT_EQ(r.total_load_w, 1'000'000.0);
    EXPECT_EQ(r.meter_count, 100u);
    ASSERT_FALSE(r.degraded());
    EXPECT_GE(r.fit->r_squared, 0.98);
    EXPECT_NEAR(r.head_current_a, 1'000'000.0 / 240.0, 1e-9);
    EXPECT_NEAR(r.voltage_min_v, 225.0, 0.1);
    // House 1 sits behind the 500 m trunk carrying the full 1 MW.
    const double house1 = 240.0 - 500.0 * default_resistance_ohm_per_m() * (1'000'000.0 / 240.0);
    EXPECT_NEAR(r.voltage_max_v, house1, 1e-9);
}

TEST(BuildReport, EmptyWindowIsNoData)
{
    FlatGroup g;
    g.buffer.ingest(reading("m1", 2'000));
    try {
        build_report(g.buffer, ReportWindow{900, 1'800}, g.positions, "AGG-01", 240.0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::NoData);
    }
}

TEST(BuildReport, TwoMeterSubsectionIsDegraded)
{
    FlatGroup g(2, 4'000.0);
    const auto r = build_report(g.buffer, ReportWindow{0, 900}, g.positions, "AGG-02", 240.0);
    EXPECT_TRUE(r.degraded());
    EXPECT_EQ(r.total_load_w, 8'000.0);
    EXPECT_EQ(r.meter_count, 2u);
    const std::string line = serialize_report(r);
    EXPECT_NE(line.find("degraded=1"), std::string::npos);
    EXPECT_NE(line.find("c0=nan"), std::string::npos);
    EXPECT_TRUE(parse_report(line).degraded());
}

TEST(BuildReport, UsesLatestInWindowReadingAndSumsExactly)
{
    auto rng = RandomStream::fork(3, "soundness");
    for (int trial = 0; trial < 200; ++trial) {
        std::map<std::string, double> positions;
        std::set<std::string> group;
        const std::size_t n = 3 + rng.uniform_int(20);
        for (std::size_t k = 0; k < n; ++k) {
            positions["m" + std::to_string(k)] = 500.0 + 50.0 * static_cast<double>(k);
            group.insert("m" + std::to_string(k));
        }
        RawDataBuffer b(group, 7'200);
        std::map<std::string, double> latest;
        for (SimTime t = 60; t <= 900; t += 60) {
            for (const auto& s : group) {
                if (rng.uniform_int(3) == 0) {
                    continue;
                }
                const double p = rng.uniform(0.0, 9'000.0);
                b.ingest(reading(s, t, rng.uniform(220.0, 240.0), p));
                latest[s] = p;
            }
        }
        if (latest.empty()) {
            continue;
        }
        double expected = 0.0;
        for (const auto& [s, p] : latest) {
            expected += p;
        }
        const auto r = build_report(b, ReportWindow{0, 900}, positions, "X", 240.0);
        EXPECT_EQ(r.meter_count, latest.size());
        EXPECT_NEAR(r.total_load_w, expected, 1e-9 * std::max(1.0, expected));
    }
}

TEST(ReportRecord, RoundTripsAndFieldCountIsFixed)
{
    for (std::size_t n : {3u, 10u, 100u}) {
        FlatGroup g(n, 5'000.0);
        const auto r = build_report(g.buffer, ReportWindow{0, 900}, g.positions, "AGG-01", 240.0);
        const std::string line = serialize_report(r);
        EXPECT_EQ(split_record(line).size(), kReportFieldNames.size()) << n;
        const auto back = parse_report(line);
        EXPECT_EQ(serialize_report(back), line);
        for (const auto& [serial, d] : g.positions) {
            EXPECT_EQ(line.find(serial + " "), std::string::npos);
        }
    }
    EXPECT_THROW(parse_report("aggregator_id=A"), Error);
    EXPECT_THROW(parse_report("garbage"), Error);
}

TEST(Passthru, ReadReturnsLatestCumulative)
{
    RawDataBuffer b({"a"}, 7'200);
    b.ingest(reading("a", 60, 240.0, 0.0, 12'000.0));
    b.ingest(reading("a", 120, 240.0, 0.0, 12'345.6));
    const CumulativeReading c = handle_passthru_read(b, "a");
    EXPECT_EQ(c.cumulative_wh, 12'345.6);
    EXPECT_EQ(c.as_of_s, 120);
    EXPECT_EQ(kCumulativeReadingFields.size(), 3u);
    EXPECT_EQ(split_record(serialize_cumulative(c)).size(), 3u);
}

TEST(Passthru, UnknownMeter)
{
    RawDataBuffer b({"a"}, 7'200);
    try {
        handle_passthru_read(b, "nope");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::UnknownMeter);
    }
    EXPECT_THROW(handle_passthru_read(b, "a"), Error);
}

TEST(Passthru, DisconnectedMeterAnswersFrozenValue)
{
    MeterState m = make_meter(MeterIdentity{"a", 1}, 0, 60);
    RawDataBuffer b({"a"}, 7'200);
    b.ingest(read_meter(m, 240.0, 6'000.0, 60));
    settle_energy(m, 6'000.0, 90);
    m = apply_connection_command(m, ConnectionCommand::Disconnect);
    b.ingest(read_meter(m, 240.0, 6'000.0, 120));
    const double frozen = handle_passthru_read(b, "a").cumulative_wh;
    b.ingest(read_meter(m, 240.0, 6'000.0, 1'800));
    EXPECT_EQ(handle_passthru_read(b, "a").cumulative_wh, frozen);
    EXPECT_NEAR(frozen, 6'000.0 * 90.0 / 3600.0, 1e-9);
}

TEST(ConnectCommand, AckStatesAndUnknownMeter)
{
    Aggregator agg("AGG-01", {{"a", 500.0}, {"b", 550.0}}, 7'200, 240.0);
    std::map<std::string, MeterState> meters{{"a", make_meter({"a", 1}, 0)},
                                             {"b", make_meter({"b", 2}, 0)}};
    Aggregator::MeterPort port = [&](const std::string& s, ConnectionCommand c) {
        meters[s] = apply_connection_command(meters[s], c);
        return meters[s].service_state;
    };
    EXPECT_EQ(agg.handle_connect_command("a", ConnectionCommand::Disconnect, port).service_state,
              ServiceState::Disconnected);
    EXPECT_EQ(agg.handle_connect_command("a", ConnectionCommand::Disconnect, port).service_state,
              ServiceState::Disconnected);
    try {
        agg.handle_connect_command("zz", ConnectionCommand::Disconnect, port);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::UnknownMeter);
    }
}

TEST(ConnectCommand, LaterReportShowsReducedLoad)
{
    Aggregator agg("AGG-01", {{"a", 500.0}, {"b", 550.0}, {"c", 600.0}}, 7'200, 240.0);
    std::map<std::string, MeterState> meters;
    for (const char* s : {"a", "b", "c"}) {
        meters[s] = make_meter({s, 1}, 0);
    }
    auto sample = [&](SimTime t) {
        for (auto& [s, m] : meters) {
            agg.ingest(read_meter(m, 239.0, 2'000.0, t));
        }
    };
    sample(900);
    const double before = agg.report({0, 900}).total_load_w;
    agg.handle_connect_command("b", ConnectionCommand::Disconnect,
                               [&](const std::string& s, ConnectionCommand c) {
                                   settle_energy(meters[s], 2'000.0, 1'000);
                                   meters[s] = apply_connection_command(meters[s], c);
                                   return meters[s].service_state;
                               });
    sample(1'800);
    const double after = agg.report({900, 1'800}).total_load_w;
    EXPECT_EQ(before, 6'000.0);
    EXPECT_EQ(after, 4'000.0);
}
