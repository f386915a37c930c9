#include "amisim/headend.hpp"
#include "amisim/network.hpp"
#include "amisim/scenario.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

using namespace amisim;

namespace {

OperatingStateReport report(std::string id, SimTime end, double total)
{
    OperatingStateReport r;
    r.aggregator_id = std::move(id);
    r.window_start_s = end - 900;
    r.window_end_s = end;
    r.total_load_w = total;
    r.meter_count = 1;
    return r;
}

} // namespace

TEST(Assemble, SumsAggregatorTotals)
{
    const std::vector<OperatingStateReport> rs{report("A", 900, 1.0e6), report("B", 900, 0.5e6)};
    const WholeGridState s = assemble_grid_state(rs, 1'000);
    EXPECT_EQ(s.grid_total_load_w, 1.5e6);
    EXPECT_EQ(s.aggregator_count(), 2u);
}

TEST(Assemble, EmptyListIsEmptyState)
{
    const WholeGridState s = assemble_grid_state(std::vector<OperatingStateReport>{}, 0);
    EXPECT_EQ(s.grid_total_load_w, 0.0);
    EXPECT_EQ(s.aggregator_count(), 0u);
}

TEST(Assemble, LatestWindowWins)
{
    const std::vector<OperatingStateReport> rs{report("A", 1'800, 2.0), report("A", 900, 1.0)};
    const WholeGridState s = assemble_grid_state(rs, 2'000);
    ASSERT_EQ(s.aggregator_count(), 1u);
    EXPECT_EQ(s.reports.at("A").window_end_s, 1'800);
    EXPECT_EQ(s.grid_total_load_w, 2.0);
}

TEST(Forecast, ConstantHistory)
{
    StateHistory h;
    for (SimTime t = 900; t <= 86'400; t += 900) {
        h.append(t, 1.0e6);
    }
    EXPECT_EQ(forecast_load(h, 900), 1.0e6);
    EXPECT_EQ(forecast_load(h, 0), 1.0e6);
}

TEST(Forecast, DailySinusoidRepeatsYesterday)
{
    auto load = [](SimTime t) {
        return 1.0e6 + 3.0e5 * std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / 86'400.0);
    };
    StateHistory h;
    for (SimTime t = 900; t <= 2 * kSecondsPerDay; t += 900) {
        h.append(t, load(t));
    }
    const SimTime last = h.samples().back().window_end_s;
    for (SimTime horizon = 900; horizon <= kSecondsPerDay; horizon += 900) {
        const HistorySample* yesterday = h.at(last + horizon - kSecondsPerDay);
        ASSERT_NE(yesterday, nullptr);
        EXPECT_EQ(forecast_load(h, horizon), yesterday->grid_total_load_w);
        EXPECT_EQ(yesterday->hour_of_day, static_cast<int>(((last + horizon) % kSecondsPerDay) / 3600));
    }
}

TEST(Forecast, EmptyHistory)
{
    try {
        forecast_load(StateHistory{}, 900);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::EmptyHistory);
    }
    StateHistory h;
    h.append(900, 1.0);
    EXPECT_THROW(h.append(900, 2.0), Error);
}

TEST(Pipeline, PollMeterMatchesAggregatorValue)
{
    AmiNetwork net(parse_scenario(kFig3FlatScenario));
    net.run();
    const std::string serial = net.serials()[16];
    const CumulativeReading polled = net.poll_meter("AGG-01", serial);
    const CumulativeReading local = net.aggregators()[0].aggregator.passthru_read(serial);
    EXPECT_EQ(polled, local);
    EXPECT_NEAR(polled.cumulative_wh, 10'000.0, 1e-9);
    EXPECT_EQ(split_record(serialize_cumulative(polled)).size(), 3u);
    EXPECT_EQ(serialize_cumulative(polled).find("v="), std::string::npos);
}

TEST(Pipeline, UnknownAggregatorAndMeter)
{
    AmiNetwork net(parse_scenario(kFig3FlatScenario));
    net.run();
    try {
        net.poll_meter("AGG-99", net.serials()[0]);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::UnknownAggregator);
    }
    try {
        net.command_connection("AGG-01", "SM00000000", ConnectionCommand::Disconnect);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::UnknownMeter);
    }
}

TEST(Pipeline, DisconnectHouse17DropsGridTotalByItsLoad)
{
    const Scenario s = parse_scenario(kFig3RandomScenario);
    AmiNetwork net(s);
    net.advance_to(1'000);
    const std::string serial = net.serials()[16];
    const double house_load = net.meter(serial).demand_w;
    const CommandAck ack = net.command_connection("AGG-01", serial, ConnectionCommand::Disconnect);
    EXPECT_EQ(ack.service_state, ServiceState::Disconnected);
    EXPECT_EQ(net.command_connection("AGG-01", net.serials()[3], ConnectionCommand::Connect).service_state,
              ServiceState::Connected);
    net.run();

    AmiNetwork baseline(s);
    baseline.run();
    const double before = baseline.headend().grid_state(baseline.now()).grid_total_load_w;
    const double after = net.headend().grid_state(net.now()).grid_total_load_w;
    EXPECT_NEAR(before - after, house_load, 1e-6);
}

TEST(Pipeline, GridStateCarriesNoSerials)
{
    AmiNetwork net(parse_scenario(kFig3RandomScenario));
    net.run();
    const std::string text = serialize_grid_state(net.headend().grid_state(net.now())) +
                             net.headend().report_log_text();
    for (const auto& serial : net.serials()) {
        EXPECT_EQ(text.find(serial), std::string::npos);
    }
}

TEST(Pipeline, HistoryHasOneSamplePerWindow)
{
    AmiNetwork net(parse_scenario(kFig3FlatScenario));
    net.run();
    const StateHistory h = net.headend().history();
    ASSERT_EQ(h.size(), 4u);
    EXPECT_EQ(h.samples().front().window_end_s, 900);
    EXPECT_EQ(h.samples().back().grid_total_load_w, 1'000'000.0);
    EXPECT_EQ(h.to_csv().substr(0, 31), "window_end_s,grid_total_load_w\n");
}
