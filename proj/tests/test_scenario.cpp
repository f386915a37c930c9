#include "amisim/rng.hpp"
#include "amisim/scenario.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <sstream>
#include <string>

using namespace amisim;

namespace {

std::string read_text(const std::string& path)
{
    std::ifstream in(path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

ErrorCode code_of(std::string_view text)
{
    try {
        parse_scenario(text);
    } catch (const Error& e) {
        return e.code();
    }
    return ErrorCode::None;
}

std::string message_of(std::string_view text)
{
    try {
        parse_scenario(text);
    } catch (const Error& e) {
        return e.what();
    }
    return {};
}

/// Random valid scenario: random feeders, each cut into contiguous aggregator ranges.
Scenario random_scenario(RandomStream& rng)
{
    Scenario s;
    s.seed = rng.next_u64();
    s.duration_s = 1 + static_cast<SimTime>(rng.uniform_int(86'400));
    s.sample_interval_s = 1 + static_cast<SimTime>(rng.uniform_int(900));
    s.report_interval_s = 1 + static_cast<SimTime>(rng.uniform_int(3'600));
    s.retention_window_s = 1 + static_cast<SimTime>(rng.uniform_int(10'000));
    s.meter_link = {static_cast<SimTime>(rng.uniform_int(5)), static_cast<SimTime>(rng.uniform_int(5))};
    s.backhaul_link = {static_cast<SimTime>(rng.uniform_int(5)), static_cast<SimTime>(rng.uniform_int(5))};
    s.noise_sigma_v = rng.uniform_int(1) ? rng.uniform(0.0, 2.0) : 0.0;
    const std::size_t feeders = 1 + rng.uniform_int(3);
    int agg = 0;
    for (std::size_t f = 0; f < feeders; ++f) {
        FeederSpec spec;
        spec.name = "F" + std::to_string(f);
        spec.config.house_count = 1 + rng.uniform_int(300);
        spec.config.source_voltage_v = rng.uniform(100.0, 400.0);
        spec.config.trunk_length_m = rng.uniform(0.0, 1'000.0);
        spec.config.spacing_m = rng.uniform(1.0, 80.0);
        if (rng.uniform_int(1)) {
            spec.config.resistance_ohm_per_m = rng.uniform(1e-8, 1e-5);
        }
        if (rng.uniform_int(1)) {
            spec.load = FixedLoad{rng.uniform(0.0, 10'000.0)};
        } else {
            const double lo = rng.uniform(0.0, 5'000.0);
            spec.load = UniformLoad{lo, lo + rng.uniform(0.0, 5'000.0)};
        }
        std::size_t first = 1;
        while (first <= spec.config.house_count) {
            const std::size_t last =
                std::min(spec.config.house_count, first + rng.uniform_int(spec.config.house_count));
            spec.assignments.push_back({"AGG-" + std::to_string(agg++), first, last});
            first = last + 1;
        }
        s.feeders.push_back(std::move(spec));
    }
    return s;
}

} // namespace

TEST(Parse, BundledFlatScenarioFile)
{
    const Scenario s = parse_scenario(read_text(AMISIM_SOURCE_DIR "/scenarios/fig3_flat.scn"));
    ASSERT_EQ(s.feeders.size(), 1u);
    EXPECT_EQ(s.feeders[0].config.house_count, 100u);
    ASSERT_TRUE(std::holds_alternative<FixedLoad>(s.feeders[0].load));
    EXPECT_EQ(std::get<FixedLoad>(s.feeders[0].load).watts, 10'000.0);
}

TEST(Parse, BundledFilesMatchCanonicalSet)
{
    for (const auto& [name, scenario] : canonical_scenarios()) {
        const std::string path = std::string(AMISIM_SOURCE_DIR "/scenarios/") + name + ".scn";
        EXPECT_EQ(parse_scenario(read_text(path)), scenario) << name;
    }
}

TEST(Parse, CanonicalSetContents)
{
    const auto all = canonical_scenarios();
    ASSERT_EQ(all.size(), 3u);
    EXPECT_TRUE(std::holds_alternative<UniformLoad>(all.at("fig3_random").feeders[0].load));
    const auto& u = std::get<UniformLoad>(all.at("fig3_random").feeders[0].load);
    EXPECT_EQ(u.min_w, 200.0);
    EXPECT_EQ(u.max_w, 10'000.0);
    EXPECT_EQ(all.at("scale_10k").meter_count(), 10'000u);
    EXPECT_EQ(all.at("scale_10k").aggregator_ids().size(), 10u);
}

TEST(Parse, MeterAssignedTwiceIsValidationError)
{
    const std::string text =
        "[feeder F1]\nhouse_count = 10\nload = fixed 1\nassign = A 1-6\nassign = B 5-10\n";
    EXPECT_EQ(code_of(text), ErrorCode::ValidationError);
    EXPECT_NE(message_of(text).find("house 5"), std::string::npos);
}

TEST(Parse, OtherValidationFailures)
{
    EXPECT_EQ(code_of("[feeder F1]\nhouse_count = 10\nassign = A 1-9\n"), ErrorCode::ValidationError);
    EXPECT_EQ(code_of("[feeder F1]\nhouse_count = 2\nassign = A 1-2\n[feeder F2]\nhouse_count = 2\n"
                      "assign = A 1-2\n"),
              ErrorCode::ValidationError);
    EXPECT_EQ(code_of("duration_s = 0\n[feeder F1]\nhouse_count = 1\nassign = A 1\n"),
              ErrorCode::ValidationError);
    EXPECT_EQ(code_of("duration_s = 10\n"), ErrorCode::ValidationError);
}

TEST(Parse, EmptyFileIsParseError)
{
    EXPECT_EQ(code_of(""), ErrorCode::ParseError);
    EXPECT_EQ(code_of("# only a comment\n\n"), ErrorCode::ParseError);
}

TEST(Parse, ParseErrorsCarryLineNumbers)
{
    EXPECT_EQ(code_of("seed = 1\nbogus = 2\n"), ErrorCode::ParseError);
    EXPECT_NE(message_of("seed = 1\nbogus = 2\n").find("line 2"), std::string::npos);
    EXPECT_NE(message_of("seed = 1\n\n[feeder F1]\nload = linear 3\n").find("line 4"), std::string::npos);
    EXPECT_EQ(code_of("seed = x\n"), ErrorCode::ParseError);
    EXPECT_EQ(code_of("[zone F1]\n"), ErrorCode::ParseError);
    EXPECT_EQ(code_of("seed = 1\nseed = 2\n"), ErrorCode::ParseError);
    EXPECT_EQ(code_of("just words\n"), ErrorCode::ParseError);
}

TEST(RoundTrip, CanonicalScenarios)
{
    for (const auto& [name, text] : canonical_scenario_texts()) {
        const Scenario s = parse_scenario(text);
        EXPECT_EQ(parse_scenario(serialize_scenario(s)), s) << name;
    }
}

TEST(RoundTrip, RandomScenarios)
{
    auto rng = RandomStream::fork(314, "scenario-roundtrip");
    for (int trial = 0; trial < 500; ++trial) {
        const Scenario s = random_scenario(rng);
        ASSERT_NO_THROW(validate(s));
        const std::string text = serialize_scenario(s);
        const Scenario back = parse_scenario(text);
        ASSERT_EQ(back, s) << text;
        ASSERT_EQ(serialize_scenario(back), text);
    }
}
