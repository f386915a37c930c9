#pragma once

// Line-oriented `key = value` scenario files. Global settings come first,
// then one `[feeder <name>]` section per feeder. See docs/scn_grammar.md.

#include "amisim/error.hpp"
#include "amisim/feeder.hpp"
#include "amisim/format.hpp"
#include "amisim/simkernel.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace amisim {

/// Houses first..last (1-based, inclusive) of a feeder served by one aggregator.
struct Assignment {
    std::string aggregator_id;
    std::size_t first_house = 1;
    std::size_t last_house = 1;

    friend bool operator==(const Assignment&, const Assignment&) = default;
};

struct FeederSpec {
    std::string name;
    FeederConfig config;
    LoadModel load = FixedLoad{0.0};
    std::vector<Assignment> assignments;

    friend bool operator==(const FeederSpec& a, const FeederSpec& b)
    {
        return a.name == b.name && a.config.source_voltage_v == b.config.source_voltage_v &&
               a.config.trunk_length_m == b.config.trunk_length_m &&
               a.config.spacing_m == b.config.spacing_m &&
               a.config.house_count == b.config.house_count &&
               a.config.resistance_ohm_per_m == b.config.resistance_ohm_per_m &&
               a.load == b.load && a.assignments == b.assignments;
    }
};

struct Scenario {
    std::uint64_t seed = 1;
    SimTime duration_s = 3600;
    SimTime sample_interval_s = 60;
    SimTime report_interval_s = 900;
    SimTime retention_window_s = 7200;
    LinkProfile meter_link{1, 0};
    LinkProfile backhaul_link{1, 0};
    /// Standard deviation of additive voltage measurement noise; 0 disables it.
    double noise_sigma_v = 0.0;
    std::vector<FeederSpec> feeders;

    std::size_t meter_count() const
    {
        std::size_t n = 0;
        for (const auto& f : feeders) {
            n += f.config.house_count;
        }
        return n;
    }

    std::vector<std::string> aggregator_ids() const
    {
        std::vector<std::string> ids;
        for (const auto& f : feeders) {
            for (const auto& a : f.assignments) {
                if (std::find(ids.begin(), ids.end(), a.aggregator_id) == ids.end()) {
                    ids.push_back(a.aggregator_id);
                }
            }
        }
        return ids;
    }

    friend bool operator==(const Scenario& a, const Scenario& b)
    {
        return a.seed == b.seed && a.duration_s == b.duration_s &&
               a.sample_interval_s == b.sample_interval_s &&
               a.report_interval_s == b.report_interval_s &&
               a.retention_window_s == b.retention_window_s &&
               a.meter_link.latency_s == b.meter_link.latency_s &&
               a.meter_link.jitter_s == b.meter_link.jitter_s &&
               a.backhaul_link.latency_s == b.backhaul_link.latency_s &&
               a.backhaul_link.jitter_s == b.backhaul_link.jitter_s &&
               a.noise_sigma_v == b.noise_sigma_v && a.feeders == b.feeders;
    }
};

namespace detail {

inline bool valid_identifier(std::string_view id)
{
    return !id.empty() && std::all_of(id.begin(), id.end(), [](char c) {
        return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') ||
               c == '-' || c == '_' || c == '.';
    });
}

[[noreturn]] inline void parse_fail(std::size_t line, const std::string& what)
{
    fail(ErrorCode::ParseError, "line " + std::to_string(line) + ": " + what);
}

} // namespace detail

/// Enforces the partition and positivity invariants.
inline void validate(const Scenario& s)
{
    auto invalid = [](const std::string& what) { fail(ErrorCode::ValidationError, what); };
    if (s.duration_s <= 0) invalid("duration_s must be positive");
    if (s.sample_interval_s <= 0) invalid("sample_interval_s must be positive");
    if (s.report_interval_s <= 0) invalid("report_interval_s must be positive");
    if (s.retention_window_s <= 0) invalid("retention_window_s must be positive");
    if (s.meter_link.latency_s < 0 || s.meter_link.jitter_s < 0 || s.backhaul_link.latency_s < 0 ||
        s.backhaul_link.jitter_s < 0) {
        invalid("link latency and jitter must be non-negative");
    }
    if (!(s.noise_sigma_v >= 0.0)) invalid("noise_sigma_v must be non-negative");
    if (s.feeders.empty()) invalid("scenario defines no feeders");

    std::set<std::string> feeder_names;
    std::map<std::string, std::string> aggregator_feeder;
    for (const auto& f : s.feeders) {
        if (!feeder_names.insert(f.name).second) invalid("duplicate feeder '" + f.name + "'");
        try {
            build_feeder(f.config);
            amisim::validate(f.load);
        } catch (const Error& e) {
            invalid("feeder '" + f.name + "': " + e.what());
        }
        const std::size_t n = f.config.house_count;
        std::vector<std::string> owner(n + 1);
        for (const auto& a : f.assignments) {
            if (!detail::valid_identifier(a.aggregator_id)) {
                invalid("invalid aggregator id '" + a.aggregator_id + "'");
            }
            auto [it, inserted] = aggregator_feeder.emplace(a.aggregator_id, f.name);
            if (!inserted && it->second != f.name) {
                invalid("aggregator '" + a.aggregator_id + "' spans feeders '" + it->second +
                        "' and '" + f.name + "'");
            }
            if (a.first_house < 1 || a.last_house < a.first_house || a.last_house > n) {
                invalid("feeder '" + f.name + "': assignment range " +
                        std::to_string(a.first_house) + "-" + std::to_string(a.last_house) +
                        " outside 1-" + std::to_string(n));
            }
            for (std::size_t h = a.first_house; h <= a.last_house; ++h) {
                if (!owner[h].empty()) {
                    invalid("feeder '" + f.name + "': meter at house " + std::to_string(h) +
                            " assigned to both '" + owner[h] + "' and '" + a.aggregator_id + "'");
                }
                owner[h] = a.aggregator_id;
            }
        }
        for (std::size_t h = 1; h <= n; ++h) {
            if (owner[h].empty()) {
                invalid("feeder '" + f.name + "': meter at house " + std::to_string(h) +
                        " has no aggregator");
            }
        }
    }
}

inline Scenario parse_scenario(std::string_view text)
{
    using detail::parse_fail;
    Scenario s;
    FeederSpec* feeder = nullptr;
    std::set<std::string> seen_global;
    std::set<std::string> seen_feeder;
    bool any_content = false;

    const auto lines = split(text, '\n');
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const std::size_t lineno = i + 1;
        std::string_view line = lines[i];
        if (const auto hash = line.find('#'); hash != std::string_view::npos) {
            line = line.substr(0, hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        any_content = true;

        if (line.front() == '[') {
            if (line.back() != ']') parse_fail(lineno, "unterminated section header");
            const auto inner = trim(line.substr(1, line.size() - 2));
            if (inner.substr(0, 7) != "feeder " && inner.substr(0, 7) != "feeder\t") {
                parse_fail(lineno, "unknown section '" + std::string(inner) + "'");
            }
            const auto name = trim(inner.substr(7));
            if (!detail::valid_identifier(name)) parse_fail(lineno, "invalid feeder name");
            s.feeders.push_back(FeederSpec{std::string(name), FeederConfig{}, FixedLoad{0.0}, {}});
            feeder = &s.feeders.back();
            seen_feeder.clear();
            continue;
        }

        const auto eq = line.find('=');
        if (eq == std::string_view::npos) parse_fail(lineno, "expected 'key = value'");
        const std::string key(trim(line.substr(0, eq)));
        const std::string_view value = trim(line.substr(eq + 1));
        if (key.empty()) parse_fail(lineno, "missing key");
        if (value.empty()) parse_fail(lineno, "missing value for '" + key + "'");

        auto as_int = [&](std::string_view v) {
            std::int64_t out = 0;
            if (!parse_int64(v, out)) parse_fail(lineno, "'" + key + "' expects an integer");
            return out;
        };
        auto as_uint = [&](std::string_view v) {
            std::uint64_t out = 0;
            if (!parse_uint64(v, out)) {
                parse_fail(lineno, "'" + key + "' expects a non-negative integer");
            }
            return out;
        };
        auto as_double = [&](std::string_view v) {
            double out = 0.0;
            if (!parse_double(v, out) || std::isnan(out)) {
                parse_fail(lineno, "'" + key + "' expects a number");
            }
            return out;
        };

        if (feeder == nullptr) {
            if (!seen_global.insert(key).second) parse_fail(lineno, "duplicate key '" + key + "'");
            if (key == "seed") s.seed = as_uint(value);
            else if (key == "duration_s") s.duration_s = as_int(value);
            else if (key == "sample_interval_s") s.sample_interval_s = as_int(value);
            else if (key == "report_interval_s") s.report_interval_s = as_int(value);
            else if (key == "retention_window_s") s.retention_window_s = as_int(value);
            else if (key == "meter_latency_s") s.meter_link.latency_s = as_int(value);
            else if (key == "meter_jitter_s") s.meter_link.jitter_s = as_int(value);
            else if (key == "backhaul_latency_s") s.backhaul_link.latency_s = as_int(value);
            else if (key == "backhaul_jitter_s") s.backhaul_link.jitter_s = as_int(value);
            else if (key == "noise_sigma_v") s.noise_sigma_v = as_double(value);
            else parse_fail(lineno, "unknown setting '" + key + "'");
            continue;
        }

        if (key != "assign" && !seen_feeder.insert(key).second) {
            parse_fail(lineno, "duplicate key '" + key + "'");
        }
        FeederConfig& c = feeder->config;
        if (key == "house_count") c.house_count = as_uint(value);
        else if (key == "source_voltage_v") c.source_voltage_v = as_double(value);
        else if (key == "trunk_length_m") c.trunk_length_m = as_double(value);
        else if (key == "spacing_m") c.spacing_m = as_double(value);
        else if (key == "resistance_ohm_per_m") {
            if (value == "calibrated") c.resistance_ohm_per_m.reset();
            else c.resistance_ohm_per_m = as_double(value);
        } else if (key == "load") {
            const auto parts = split(value, ' ');
            std::vector<std::string_view> words;
            for (const auto& p : parts) {
                if (!trim(p).empty()) words.push_back(trim(p));
            }
            if (words.size() == 2 && words[0] == "fixed") {
                feeder->load = FixedLoad{as_double(words[1])};
            } else if (words.size() == 3 && words[0] == "uniform") {
                feeder->load = UniformLoad{as_double(words[1]), as_double(words[2])};
            } else {
                parse_fail(lineno, "load must be 'fixed <w>' or 'uniform <min_w> <max_w>'");
            }
        } else if (key == "assign") {
            const auto space = value.find(' ');
            if (space == std::string_view::npos) {
                parse_fail(lineno, "assign expects '<aggregator_id> <first>-<last>'");
            }
            const auto id = trim(value.substr(0, space));
            const auto range = trim(value.substr(space + 1));
            const auto dash = range.find('-');
            Assignment a;
            a.aggregator_id = std::string(id);
            if (dash == std::string_view::npos) {
                a.first_house = a.last_house = as_uint(range);
            } else {
                a.first_house = as_uint(range.substr(0, dash));
                a.last_house = as_uint(range.substr(dash + 1));
            }
            feeder->assignments.push_back(std::move(a));
        } else {
            parse_fail(lineno, "unknown feeder key '" + key + "'");
        }
    }
    if (!any_content) {
        fail(ErrorCode::ParseError, "line 1: scenario is empty");
    }
    validate(s);
    return s;
}

inline std::string serialize_scenario(const Scenario& s)
{
    std::string out;
    auto kv = [&out](std::string_view k, const std::string& v) {
        out += k;
        out += " = ";
        out += v;
        out += '\n';
    };
    kv("seed", std::to_string(s.seed));
    kv("duration_s", std::to_string(s.duration_s));
    kv("sample_interval_s", std::to_string(s.sample_interval_s));
    kv("report_interval_s", std::to_string(s.report_interval_s));
    kv("retention_window_s", std::to_string(s.retention_window_s));
    kv("meter_latency_s", std::to_string(s.meter_link.latency_s));
    kv("meter_jitter_s", std::to_string(s.meter_link.jitter_s));
    kv("backhaul_latency_s", std::to_string(s.backhaul_link.latency_s));
    kv("backhaul_jitter_s", std::to_string(s.backhaul_link.jitter_s));
    kv("noise_sigma_v", format_double(s.noise_sigma_v));
    for (const auto& f : s.feeders) {
        out += "\n[feeder " + f.name + "]\n";
        kv("house_count", std::to_string(f.config.house_count));
        kv("source_voltage_v", format_double(f.config.source_voltage_v));
        kv("trunk_length_m", format_double(f.config.trunk_length_m));
        kv("spacing_m", format_double(f.config.spacing_m));
        kv("resistance_ohm_per_m", f.config.resistance_ohm_per_m
                                       ? format_double(*f.config.resistance_ohm_per_m)
                                       : std::string("calibrated"));
        if (const auto* fixed = std::get_if<FixedLoad>(&f.load)) {
            kv("load", "fixed " + format_double(fixed->watts));
        } else {
            const auto& u = std::get<UniformLoad>(f.load);
            kv("load", "uniform " + format_double(u.min_w) + " " + format_double(u.max_w));
        }
        for (const auto& a : f.assignments) {
            kv("assign", a.aggregator_id + " " + std::to_string(a.first_house) + "-" +
                             std::to_string(a.last_house));
        }
    }
    return out;
}

inline constexpr std::string_view kFig3FlatScenario = R"(# 100 houses, all at 10 kW: the far end settles at 225 V.
seed = 42
duration_s = 3600
sample_interval_s = 60
report_interval_s = 900
retention_window_s = 7200

[feeder F1]
house_count = 100
source_voltage_v = 240
trunk_length_m = 500
spacing_m = 50
resistance_ohm_per_m = calibrated
load = fixed 10000
assign = AGG-01 1-100
)";

inline constexpr std::string_view kFig3RandomScenario = R"(# 100 houses with independent uniform loads between 200 W and 10 kW.
seed = 42
duration_s = 3600
sample_interval_s = 60
report_interval_s = 900
retention_window_s = 7200

[feeder F1]
house_count = 100
source_voltage_v = 240
trunk_length_m = 500
spacing_m = 50
resistance_ohm_per_m = calibrated
load = uniform 200 10000
assign = AGG-01 1-100
)";

/// 10 feeders of 1000 houses, one aggregator each.
inline std::string scale_10k_scenario_text()
{
    std::string out = R"(# 10^4 meters on 10 feeders of 1000 houses, one aggregator per feeder.
# Houses are 10 m apart on a lower-resistance conductor so the far end stays
# near 228 V under the average load.
seed = 42
duration_s = 3600
sample_interval_s = 60
report_interval_s = 900
retention_window_s = 7200
)";
    for (int f = 1; f <= 10; ++f) {
        char name[8];
        std::snprintf(name, sizeof name, "%02d", f);
        out += "\n[feeder F";
        out += name;
        out += "]\nhouse_count = 1000\nsource_voltage_v = 240\ntrunk_length_m = 500\n"
               "spacing_m = 10\nresistance_ohm_per_m = 1e-7\nload = uniform 200 10000\n"
               "assign = AGG-";
        out += name;
        out += " 1-1000\n";
    }
    return out;
}

/// Named scenario texts shipped with the library.
inline std::map<std::string, std::string> canonical_scenario_texts()
{
    return {{"fig3_flat", std::string(kFig3FlatScenario)},
            {"fig3_random", std::string(kFig3RandomScenario)},
            {"scale_10k", scale_10k_scenario_text()}};
}

inline std::map<std::string, Scenario> canonical_scenarios()
{
    std::map<std::string, Scenario> out;
    for (const auto& [name, text] : canonical_scenario_texts()) {
        out.emplace(name, parse_scenario(text));
    }
    return out;
}

} // namespace amisim
