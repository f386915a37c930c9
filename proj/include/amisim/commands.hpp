#pragma once

// Batch commands behind the `amisim` executable. Each returns the process exit
// status: 0 success, 1 domain failure, 2 usage or I/O error.

#include "amisim/aggregator.hpp"
#include "amisim/error.hpp"
#include "amisim/format.hpp"
#include "amisim/headend.hpp"
#include "amisim/network.hpp"
#include "amisim/privacy.hpp"
#include "amisim/rng.hpp"
#include "amisim/scenario.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace amisim::cli {

namespace fs = std::filesystem;

inline constexpr int kExitOk = 0;
inline constexpr int kExitDomain = 1;
inline constexpr int kExitUsage = 2;

inline constexpr std::string_view kProfileHeader = "house_index,distance_m,load_w,voltage_v";
inline constexpr std::string_view kRawCountsHeader = "aggregator_id,window_end_s,readings,reading_bytes";

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline std::string read_file(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot read " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const fs::path& path, const std::string& content)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    out << content;
    if (!out) {
        throw IoError("write failed for " + path.string());
    }
}

inline std::string hex64(std::uint64_t v)
{
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

inline std::vector<std::string> nonempty_lines(const std::string& text)
{
    std::vector<std::string> out;
    for (auto& line : split(text, '\n')) {
        if (!trim(line).empty()) {
            out.push_back(std::move(line));
        }
    }
    return out;
}

inline Scenario load_scenario(const fs::path& path) { return parse_scenario(read_file(path)); }

/// Every serial a scenario creates, derived without running it.
inline std::set<std::string> scenario_serials(const Scenario& s)
{
    std::set<std::string> out;
    for (const auto& f : s.feeders) {
        for (std::size_t h = 1; h <= f.config.house_count; ++h) {
            out.insert(make_serial(f.name, h));
        }
    }
    return out;
}

inline std::string profile_csv(const AmiNetwork& net, std::size_t feeder)
{
    const VoltageProfile profile = net.profile(feeder);
    const LoadVector loads = net.drawn_loads(feeder);
    std::string out(kProfileHeader);
    out += '\n';
    for (std::size_t k = 0; k < profile.size(); ++k) {
        out += std::to_string(k + 1) + "," + format_double(profile.distance_m[k]) + "," +
               format_double(loads[k]) + "," + format_double(profile.voltage_v[k]) + "\n";
    }
    return out;
}

inline std::string raw_counts_csv(const AmiNetwork& net)
{
    std::string out(kRawCountsHeader);
    out += '\n';
    for (const auto& t : net.raw_tallies()) {
        out += t.aggregator_id + "," + std::to_string(t.window_end_s) + "," +
               std::to_string(t.readings) + "," + std::to_string(t.reading_bytes) + "\n";
    }
    return out;
}

template <class Fn>
int guarded(std::ostream& err, Fn&& fn)
{
    try {
        return fn();
    } catch (const IoError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        switch (e.code()) {
        case ErrorCode::ParseError:
        case ErrorCode::ValidationError:
        case ErrorCode::MalformedRecord:
        case ErrorCode::InvalidArgument:
            return kExitUsage;
        default:
            return kExitDomain;
        }
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    }
}

struct SimulateOptions {
    fs::path scenario;
    fs::path out_dir;
    std::optional<std::uint64_t> seed_override;
    bool event_log = false;
};

/// Runs a scenario and writes profile.csv, reports.log, digest.txt,
/// history.csv, raw_counts.csv and run.scn into the output directory.
inline int cmd_simulate(const SimulateOptions& opt, std::ostream& out, std::ostream& err)
{
    return guarded(err, [&] {
        Scenario scenario = load_scenario(opt.scenario);
        if (opt.seed_override) {
            scenario.seed = *opt.seed_override;
        }
        std::error_code ec;
        fs::create_directories(opt.out_dir, ec);
        if (ec || !fs::is_directory(opt.out_dir)) {
            throw IoError("cannot create output directory " + opt.out_dir.string());
        }
        AmiNetwork net(scenario);
        std::ofstream events;
        if (opt.event_log) {
            events.open(opt.out_dir / "events.log", std::ios::binary | std::ios::trunc);
            if (!events) {
                throw IoError("cannot write events.log");
            }
            net.kernel().set_event_log(&events);
        }
        net.run();
        net.kernel().set_event_log(nullptr);

        const std::string reports = net.headend().report_log_text();
        const std::string profile = profile_csv(net, 0);
        write_file(opt.out_dir / "profile.csv", profile);
        if (net.feeders().size() > 1) {
            for (std::size_t f = 0; f < net.feeders().size(); ++f) {
                write_file(opt.out_dir / ("profile_" + net.feeders()[f].name + ".csv"),
                           profile_csv(net, f));
            }
        }
        write_file(opt.out_dir / "reports.log", reports);
        write_file(opt.out_dir / "history.csv", net.headend().history().to_csv());
        write_file(opt.out_dir / "raw_counts.csv", raw_counts_csv(net));
        write_file(opt.out_dir / "run.scn", serialize_scenario(scenario));

        std::string digest = "event_digest=" + hex64(net.kernel().digest()) + "\n";
        digest += "events_processed=" + std::to_string(net.kernel().processed_total()) + "\n";
        for (const auto& [kind, count] : net.kernel().kind_counts()) {
            digest += "events." + std::string(kind) + "=" + std::to_string(count) + "\n";
        }
        digest += "reports_digest=" + hex64(fnv1a64(reports)) + "\n";
        digest += "profile_digest=" + hex64(fnv1a64(profile)) + "\n";
        write_file(opt.out_dir / "digest.txt", digest);

        const VoltageProfile p = net.profile(0);
        out << "meters=" << net.meters().size() << " aggregators=" << net.aggregators().size()
            << " reports=" << net.headend().report_log().size()
            << " events=" << net.kernel().processed_total() << "\n";
        out << "feeder " << net.feeders()[0].name << ": source "
            << format_double(net.feeders()[0].topology.source_voltage_v) << " V, house "
            << p.size() << " " << std::fixed << std::setprecision(3) << p.voltage_v.back()
            << " V\n";
        out << std::defaultfloat << "digest " << hex64(net.kernel().digest()) << "\n";
        return kExitOk;
    });
}

struct AuditOptions {
    fs::path reports;
    std::optional<fs::path> scenario;
};

/// Audits each report line; prints `window_end_s,passed,violation_count`.
inline int cmd_audit(const AuditOptions& opt, std::ostream& out, std::ostream& err)
{
    return guarded(err, [&] {
        const std::string text = read_file(opt.reports);
        std::set<std::string> serials;
        fs::path scenario_path = opt.scenario.value_or(opt.reports.parent_path() / "run.scn");
        if (fs::exists(scenario_path)) {
            serials = scenario_serials(load_scenario(scenario_path));
        } else if (opt.scenario) {
            throw IoError("cannot read " + scenario_path.string());
        } else {
            err << "warning: no run.scn next to the report log; serial checks skipped\n";
        }
        bool all_passed = true;
        out << "window_end_s,passed,violation_count\n";
        for (const auto& line : nonempty_lines(text)) {
            const AuditResult result = audit_report(line, serials);
            std::string window = "?";
            for (const auto& [k, v] : split_record(line)) {
                if (k == "window_end_s") {
                    window = v;
                }
            }
            out << window << "," << (result.passed ? "true" : "false") << ","
                << result.violations.size() << "\n";
            for (const auto& v : result.violations) {
                out << "# violation window_end_s=" << window << " field=" << v.field_path
                    << " kind=" << v.kind << "\n";
            }
            all_passed = all_passed && result.passed;
        }
        return all_passed ? kExitOk : kExitDomain;
    });
}

struct StatsOptions {
    fs::path run_dir;
    bool bytes = false;
};

/// Data reduction per report window and overall, from a simulate output dir.
inline int cmd_stats(const StatsOptions& opt, std::ostream& out, std::ostream& err)
{
    return guarded(err, [&] {
        const auto reports = nonempty_lines(read_file(opt.run_dir / "reports.log"));
        const auto raw_lines = nonempty_lines(read_file(opt.run_dir / "raw_counts.csv"));
        if (raw_lines.empty() || raw_lines.front() != kRawCountsHeader) {
            throw IoError("raw_counts.csv lacks its header");
        }
        struct Window {
            std::size_t raw = 0;
            std::size_t reported = 0;
        };
        std::map<SimTime, Window> windows;
        for (std::size_t i = 1; i < raw_lines.size(); ++i) {
            const auto cols = split(raw_lines[i], ',');
            std::int64_t end = 0;
            std::uint64_t readings = 0;
            std::uint64_t bytes = 0;
            if (cols.size() != 4 || !parse_int64(cols[1], end) || !parse_uint64(cols[2], readings) ||
                !parse_uint64(cols[3], bytes)) {
                throw IoError("malformed raw_counts.csv line " + std::to_string(i + 1));
            }
            windows[end].raw += opt.bytes ? bytes : readings * kReadingValueCount;
        }
        for (const auto& line : reports) {
            const OperatingStateReport r = parse_report(line);
            windows[r.window_end_s].reported += opt.bytes ? line.size() + 1 : kReportValueCount;
        }
        std::size_t raw_total = 0;
        std::size_t reported_total = 0;
        out << "mode=" << (opt.bytes ? "bytes" : "values") << "\n";
        out << "window_end_s,raw,reported,reduction_factor\n";
        for (const auto& [end, w] : windows) {
            raw_total += w.raw;
            reported_total += w.reported;
            const std::string factor =
                w.raw > 0 && w.reported > 0 ? format_double(reduction_factor(w.raw, w.reported).reduction_factor)
                                            : "nan";
            out << end << "," << w.raw << "," << w.reported << "," << factor << "\n";
        }
        const ReductionStats total = reduction_factor(raw_total, reported_total);
        out << "total," << total.raw_values_count << "," << total.report_values_count << ","
            << format_double(total.reduction_factor) << "\n";
        return kExitOk;
    });
}

enum class PassthruAction { Read, Connect, Disconnect };

struct PassthruOptions {
    fs::path run_dir;
    PassthruAction action = PassthruAction::Read;
    std::string aggregator_id;
    std::string serial;
    /// Command issue time for connect/disconnect; defaults to mid-run.
    std::optional<SimTime> at;
};

/// Replays the run from run.scn, then exercises the pass-thru path.
inline int cmd_passthru(const PassthruOptions& opt, std::ostream& out, std::ostream& err)
{
    return guarded(err, [&] {
        const Scenario scenario = load_scenario(opt.run_dir / "run.scn");
        if (opt.action == PassthruAction::Read) {
            AmiNetwork net(scenario);
            net.run();
            const CumulativeReading r = net.poll_meter(opt.aggregator_id, opt.serial);
            out << "serial,as_of_s,cumulative_wh\n"
                << r.serial << "," << r.as_of_s << "," << format_double(r.cumulative_wh) << "\n";
            return kExitOk;
        }
        const SimTime at = opt.at.value_or(scenario.duration_s / 2);
        if (at < 0) {
            fail(ErrorCode::InvalidArgument, "--at must be non-negative");
        }
        AmiNetwork baseline(scenario);
        baseline.run();
        const double before = baseline.headend().grid_state(baseline.now()).grid_total_load_w;

        AmiNetwork net(scenario);
        net.advance_to(at);
        const CommandAck ack = net.command_connection(
            opt.aggregator_id, opt.serial,
            opt.action == PassthruAction::Connect ? ConnectionCommand::Connect
                                                  : ConnectionCommand::Disconnect);
        const SimTime acked_at = net.now();
        net.advance_to(std::max(net.end_time(), net.now()));
        const double after = net.headend().grid_state(net.now()).grid_total_load_w;
        out << "ack serial=" << ack.serial << " state=" << to_string(ack.service_state)
            << " issued_at_s=" << at << " acked_at_s=" << acked_at << "\n";
        out << "baseline_final_grid_total_w=" << format_double(before) << "\n";
        out << "final_grid_total_w=" << format_double(after) << "\n";
        return kExitOk;
    });
}

struct AmbiguityOptions {
    fs::path run_dir;
    std::size_t trials = 1000;
    std::uint64_t seed = 1;
};

/// Reconstruction ambiguity of each whole-feeder aggregator's latest report.
inline int cmd_ambiguity(const AmbiguityOptions& opt, std::ostream& out, std::ostream& err)
{
    return guarded(err, [&] {
        const Scenario scenario = load_scenario(opt.run_dir / "run.scn");
        std::vector<OperatingStateReport> reports;
        for (const auto& line : nonempty_lines(read_file(opt.run_dir / "reports.log"))) {
            reports.push_back(parse_report(line));
        }
        const WholeGridState state = assemble_grid_state(reports, 0);
        out << "trials,indistinguishable,tolerance\n";
        std::size_t evaluated = 0;
        for (const auto& f : scenario.feeders) {
            if (f.assignments.size() != 1) {
                err << "note: feeder " << f.name << " is split across aggregators; skipped\n";
                continue;
            }
            auto it = state.reports.find(f.assignments.front().aggregator_id);
            if (it == state.reports.end() || it->second.degraded()) {
                continue;
            }
            const AmbiguityResult r = reconstruction_ambiguity(it->second, build_feeder(f.config),
                                                               opt.trials, opt.seed);
            out << "# aggregator=" << it->first << " window_end_s=" << it->second.window_end_s
                << " free_dimensions=" << r.free_dimensions
                << " low_dimension=" << (r.low_dimension ? "true" : "false") << "\n";
            out << r.trials << "," << r.indistinguishable_count << ","
                << format_double(r.tolerance) << "\n";
            ++evaluated;
        }
        if (evaluated == 0) {
            fail(ErrorCode::DegradedReport, "no whole-feeder fitted report to analyse");
        }
        return kExitOk;
    });
}

} // namespace amisim::cli
