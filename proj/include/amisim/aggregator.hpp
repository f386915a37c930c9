#pragma once

// Aggregator: retention-bounded raw buffer, operating-state extraction and
// the on-demand pass-thru for billing reads and connection commands.

#include "amisim/error.hpp"
#include "amisim/format.hpp"
#include "amisim/metering.hpp"
#include "amisim/polyfit.hpp"
#include "amisim/simkernel.hpp"

#include <algorithm>
#include <array>
#include <cstddef>
#include <functional>
#include <iterator>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace amisim {

/// Half-open window (start_s, end_s].
struct ReportWindow {
    SimTime start_s = 0;
    SimTime end_s = 0;

    bool contains(SimTime t) const noexcept { return t > start_s && t <= end_s; }
};

/// Per-Aggregator store of raw readings keyed by serial then timestamp. This
/// is the only structure that ever holds meter serials next to measurements.
class RawDataBuffer {
public:
    using Series = std::map<SimTime, MeterReading>;

    RawDataBuffer() = default;
    RawDataBuffer(std::set<std::string> group, SimTime retention_window_s)
        : group_(std::move(group)), retention_window_s_(retention_window_s)
    {
        if (retention_window_s_ < 0) {
            fail(ErrorCode::InvalidArgument, "retention window must be non-negative");
        }
    }

    bool is_member(const std::string& serial) const { return group_.contains(serial); }
    const std::set<std::string>& group() const noexcept { return group_; }

    SimTime retention_window_s() const noexcept { return retention_window_s_; }
    SimTime now() const noexcept { return now_; }

    /// Stores a reading; a duplicate (serial, timestamp) is replaced by the newer arrival.
    void ingest(MeterReading reading)
    {
        if (!is_member(reading.serial)) {
            fail(ErrorCode::ForeignMeter, "meter not assigned to this aggregator");
        }
        now_ = std::max(now_, reading.timestamp_s);
        const SimTime t = reading.timestamp_s;
        auto& series = series_[reading.serial];
        auto [it, inserted] = series.insert_or_assign(t, std::move(reading));
        if (inserted) {
            ++size_;
        }
    }

    /// Drops readings older than now - retention. Returns how many were removed.
    std::size_t evict_expired(SimTime now)
    {
        now_ = std::max(now_, now);
        const SimTime cutoff = now_ - retention_window_s_;
        std::size_t evicted = 0;
        for (auto it = series_.begin(); it != series_.end();) {
            auto& series = it->second;
            auto keep = series.lower_bound(cutoff);
            evicted += static_cast<std::size_t>(std::distance(series.begin(), keep));
            series.erase(series.begin(), keep);
            it = series.empty() ? series_.erase(it) : std::next(it);
        }
        size_ -= evicted;
        return evicted;
    }

    const MeterReading* find(const std::string& serial, SimTime t) const
    {
        auto it = series_.find(serial);
        if (it == series_.end()) {
            return nullptr;
        }
        auto r = it->second.find(t);
        return r == it->second.end() ? nullptr : &r->second;
    }

    const MeterReading* latest(const std::string& serial) const
    {
        auto it = series_.find(serial);
        if (it == series_.end() || it->second.empty()) {
            return nullptr;
        }
        return &it->second.rbegin()->second;
    }

    /// Latest reading of `serial` inside the window, if any.
    const MeterReading* latest_in(const std::string& serial, ReportWindow window) const
    {
        auto it = series_.find(serial);
        if (it == series_.end()) {
            return nullptr;
        }
        auto r = it->second.upper_bound(window.end_s);
        if (r == it->second.begin()) {
            return nullptr;
        }
        --r;
        return window.contains(r->first) ? &r->second : nullptr;
    }

    std::size_t count_in(ReportWindow window) const
    {
        std::size_t n = 0;
        for (const auto& [serial, series] : series_) {
            n += static_cast<std::size_t>(std::distance(series.upper_bound(window.start_s),
                                                        series.upper_bound(window.end_s)));
        }
        return n;
    }

    std::optional<SimTime> oldest_timestamp() const
    {
        std::optional<SimTime> oldest;
        for (const auto& [serial, series] : series_) {
            if (!series.empty() && (!oldest || series.begin()->first < *oldest)) {
                oldest = series.begin()->first;
            }
        }
        return oldest;
    }

    std::size_t size() const noexcept { return size_; }
    bool empty() const noexcept { return size_ == 0; }

    const std::map<std::string, Series>& series() const noexcept { return series_; }

private:
    std::set<std::string> group_;
    SimTime retention_window_s_ = 7200;
    SimTime now_ = 0;
    std::size_t size_ = 0;
    std::map<std::string, Series> series_;
};

inline void ingest_reading(RawDataBuffer& buffer, MeterReading reading)
{
    buffer.ingest(std::move(reading));
}

inline std::size_t evict_expired(RawDataBuffer& buffer, SimTime now)
{
    return buffer.evict_expired(now);
}

/// The anonymized operating state sent upstream. Holds no serials and no
/// per-meter sequences; its width does not depend on meter_count.
struct OperatingStateReport {
    std::string aggregator_id;
    SimTime window_start_s = 0;
    SimTime window_end_s = 0;
    /// Empty when fewer than three distinct distances were available.
    std::optional<PolyFit> fit;
    double total_load_w = 0.0;
    double head_current_a = 0.0;
    std::size_t meter_count = 0;
    double voltage_min_v = 0.0;
    double voltage_max_v = 0.0;
    double voltage_mean_v = 0.0;

    bool degraded() const noexcept { return !fit.has_value(); }
};

/// Scalar values per report: every serialized field except aggregator_id.
inline constexpr std::size_t kReportValueCount = 15;

inline constexpr std::array<std::string_view, 16> kReportFieldNames{
    "aggregator_id", "window_start_s", "window_end_s", "c0",          "c1",
    "c2",            "r2",             "norm_mean",    "norm_scale",  "total_load_w",
    "head_current_a", "meter_count",   "v_min",        "v_max",       "v_mean",
    "degraded"};

inline std::string serialize_report(const OperatingStateReport& r)
{
    const double nan = std::numeric_limits<double>::quiet_NaN();
    const PolyFit f = r.fit.value_or(PolyFit{nan, nan, nan, nan, nan, nan});
    std::string out;
    auto put = [&out](std::string_view key, const std::string& value) {
        if (!out.empty()) {
            out += ' ';
        }
        out += key;
        out += '=';
        out += value;
    };
    put("aggregator_id", r.aggregator_id);
    put("window_start_s", std::to_string(r.window_start_s));
    put("window_end_s", std::to_string(r.window_end_s));
    put("c0", format_double(f.c0));
    put("c1", format_double(f.c1));
    put("c2", format_double(f.c2));
    put("r2", format_double(f.r_squared));
    put("norm_mean", format_double(f.norm_center));
    put("norm_scale", format_double(f.norm_scale));
    put("total_load_w", format_double(r.total_load_w));
    put("head_current_a", format_double(r.head_current_a));
    put("meter_count", std::to_string(r.meter_count));
    put("v_min", format_double(r.voltage_min_v));
    put("v_max", format_double(r.voltage_max_v));
    put("v_mean", format_double(r.voltage_mean_v));
    put("degraded", r.degraded() ? "1" : "0");
    return out;
}

/// Strict inverse of serialize_report: exactly the documented fields, in any order.
inline OperatingStateReport parse_report(std::string_view line)
{
    const RecordFields fields = split_record(line);
    std::map<std::string, std::string> by_name;
    for (const auto& [k, v] : fields) {
        if (std::find(kReportFieldNames.begin(), kReportFieldNames.end(), k) ==
            kReportFieldNames.end()) {
            fail(ErrorCode::MalformedRecord, "unexpected field '" + k + "'");
        }
        if (!by_name.emplace(k, v).second) {
            fail(ErrorCode::MalformedRecord, "duplicate field '" + k + "'");
        }
    }
    for (auto name : kReportFieldNames) {
        if (!by_name.contains(std::string(name))) {
            fail(ErrorCode::MalformedRecord, "missing field '" + std::string(name) + "'");
        }
    }
    auto num = [&](const char* key) {
        double v = 0.0;
        if (!parse_double(by_name.at(key), v)) {
            fail(ErrorCode::MalformedRecord, std::string("field '") + key + "' is not a number");
        }
        return v;
    };
    auto integer = [&](const char* key) {
        std::int64_t v = 0;
        if (!parse_int64(by_name.at(key), v)) {
            fail(ErrorCode::MalformedRecord, std::string("field '") + key + "' is not an integer");
        }
        return v;
    };
    OperatingStateReport r;
    r.aggregator_id = by_name.at("aggregator_id");
    r.window_start_s = integer("window_start_s");
    r.window_end_s = integer("window_end_s");
    const auto degraded = integer("degraded");
    if (degraded != 0 && degraded != 1) {
        fail(ErrorCode::MalformedRecord, "degraded must be 0 or 1");
    }
    if (degraded == 0) {
        r.fit = PolyFit{num("c0"), num("c1"), num("c2"), num("r2"), num("norm_mean"),
                        num("norm_scale")};
    }
    r.total_load_w = num("total_load_w");
    r.head_current_a = num("head_current_a");
    const auto count = integer("meter_count");
    if (count < 0) {
        fail(ErrorCode::MalformedRecord, "negative meter_count");
    }
    r.meter_count = static_cast<std::size_t>(count);
    r.voltage_min_v = num("v_min");
    r.voltage_max_v = num("v_max");
    r.voltage_mean_v = num("v_mean");
    return r;
}

/// Builds the operating state from the latest in-window reading of each meter.
inline OperatingStateReport build_report(const RawDataBuffer& buffer, ReportWindow window,
                                         const std::map<std::string, double>& positions,
                                         std::string aggregator_id, double nominal_voltage_v)
{
    if (window.end_s <= window.start_s) {
        fail(ErrorCode::InvalidArgument, "report window is empty");
    }
    if (window.end_s > buffer.now()) {
        fail(ErrorCode::InvalidArgument, "report window ends after buffer clock");
    }
    if (!(nominal_voltage_v > 0.0)) {
        fail(ErrorCode::InvalidArgument, "nominal voltage must be positive");
    }
    std::vector<DistanceVoltage> samples;
    OperatingStateReport report;
    report.aggregator_id = std::move(aggregator_id);
    report.window_start_s = window.start_s;
    report.window_end_s = window.end_s;
    report.voltage_min_v = std::numeric_limits<double>::infinity();
    report.voltage_max_v = -std::numeric_limits<double>::infinity();
    double voltage_sum = 0.0;
    for (const auto& [serial, series] : buffer.series()) {
        const MeterReading* r = buffer.latest_in(serial, window);
        if (r == nullptr) {
            continue;
        }
        auto pos = positions.find(serial);
        if (pos == positions.end()) {
            fail(ErrorCode::InvalidArgument, "no feeder position for buffered meter");
        }
        samples.push_back({pos->second, r->voltage_v});
        report.total_load_w += r->power_w;
        report.voltage_min_v = std::min(report.voltage_min_v, r->voltage_v);
        report.voltage_max_v = std::max(report.voltage_max_v, r->voltage_v);
        voltage_sum += r->voltage_v;
    }
    if (samples.empty()) {
        fail(ErrorCode::NoData, "no readings in window (" + std::to_string(window.start_s) + ", " +
                                    std::to_string(window.end_s) + "]");
    }
    report.meter_count = samples.size();
    report.voltage_mean_v = voltage_sum / static_cast<double>(samples.size());
    report.head_current_a = report.total_load_w / nominal_voltage_v;
    if (distinct_distance_count(samples) >= 3) {
        report.fit = fit_feeder_polynomial(samples);
    }
    return report;
}

/// Billing-only projection of a meter's latest reading.
struct CumulativeReading {
    std::string serial;
    SimTime as_of_s = 0;
    double cumulative_wh = 0.0;

    friend bool operator==(const CumulativeReading&, const CumulativeReading&) = default;
};

inline constexpr std::array<std::string_view, 3> kCumulativeReadingFields{"serial", "as_of_s",
                                                                          "cumulative_wh"};

inline std::string serialize_cumulative(const CumulativeReading& r)
{
    return "serial=" + r.serial + " as_of_s=" + std::to_string(r.as_of_s) +
           " cumulative_wh=" + format_double(r.cumulative_wh);
}

inline CumulativeReading handle_passthru_read(const RawDataBuffer& buffer, const std::string& serial)
{
    if (!buffer.is_member(serial)) {
        fail(ErrorCode::UnknownMeter, "meter not served by this aggregator");
    }
    const MeterReading* r = buffer.latest(serial);
    if (r == nullptr) {
        fail(ErrorCode::NoData, "no reading retained for meter");
    }
    return CumulativeReading{r->serial, r->timestamp_s, r->cumulative_wh};
}

struct CommandAck {
    std::uint64_t request_id = 0;
    std::string serial;
    ServiceState service_state = ServiceState::Connected;
    ErrorCode error = ErrorCode::None;
};

/// Aggregator node state: its raw buffer, the feeder positions of its meters
/// and the settings needed to produce reports.
class Aggregator {
public:
    /// Delivers a connection command to a meter and returns its resulting state.
    using MeterPort = std::function<ServiceState(const std::string& serial, ConnectionCommand)>;

    Aggregator(std::string id, std::map<std::string, double> positions, SimTime retention_window_s,
               double nominal_voltage_v)
        : id_(std::move(id)),
          positions_(std::move(positions)),
          buffer_(member_set(positions_), retention_window_s),
          nominal_voltage_v_(nominal_voltage_v)
    {
        if (positions_.empty()) {
            fail(ErrorCode::InvalidArgument, "aggregator '" + id_ + "' serves no meters");
        }
    }

    const std::string& id() const noexcept { return id_; }
    const std::map<std::string, double>& positions() const noexcept { return positions_; }
    RawDataBuffer& buffer() noexcept { return buffer_; }
    const RawDataBuffer& buffer() const noexcept { return buffer_; }
    double nominal_voltage_v() const noexcept { return nominal_voltage_v_; }

    void ingest(MeterReading reading) { buffer_.ingest(std::move(reading)); }

    OperatingStateReport report(ReportWindow window) const
    {
        return build_report(buffer_, window, positions_, id_, nominal_voltage_v_);
    }

    CumulativeReading passthru_read(const std::string& serial) const
    {
        return handle_passthru_read(buffer_, serial);
    }

    CommandAck handle_connect_command(const std::string& serial, ConnectionCommand cmd,
                                      const MeterPort& port, std::uint64_t request_id = 0) const
    {
        if (!buffer_.is_member(serial)) {
            fail(ErrorCode::UnknownMeter, "meter not served by aggregator '" + id_ + "'");
        }
        return CommandAck{request_id, serial, port(serial, cmd), ErrorCode::None};
    }

private:
    static std::set<std::string> member_set(const std::map<std::string, double>& positions)
    {
        std::set<std::string> out;
        for (const auto& [serial, d] : positions) {
            out.insert(serial);
        }
        return out;
    }

    std::string id_;
    std::map<std::string, double> positions_;
    RawDataBuffer buffer_;
    double nominal_voltage_v_;
};

} // namespace amisim
