#pragma once

#include "amisim/aggregator.hpp"
#include "amisim/error.hpp"
#include "amisim/format.hpp"
#include "amisim/simkernel.hpp"

#include <algorithm>
#include <cstddef>
#include <map>
#include <span>
#include <sstream>
#include <string>
#include <vector>

namespace amisim {

/// Whole-grid operating state: the latest report of every Aggregator.
struct WholeGridState {
    SimTime as_of_s = 0;
    std::map<std::string, OperatingStateReport> reports;
    double grid_total_load_w = 0.0;

    std::size_t aggregator_count() const noexcept { return reports.size(); }
};

/// Keeps the latest window per aggregator (later window end wins) and sums totals.
inline WholeGridState assemble_grid_state(std::span<const OperatingStateReport> reports,
                                          SimTime as_of_s)
{
    WholeGridState state;
    state.as_of_s = as_of_s;
    for (const auto& r : reports) {
        auto it = state.reports.find(r.aggregator_id);
        if (it == state.reports.end()) {
            state.reports.emplace(r.aggregator_id, r);
        } else if (r.window_end_s >= it->second.window_end_s) {
            it->second = r;
        }
    }
    for (const auto& [id, r] : state.reports) {
        state.grid_total_load_w += r.total_load_w;
    }
    return state;
}

inline std::string serialize_grid_state(const WholeGridState& state)
{
    std::string out = "as_of_s=" + std::to_string(state.as_of_s) +
                      " aggregator_count=" + std::to_string(state.aggregator_count()) +
                      " grid_total_load_w=" + format_double(state.grid_total_load_w) + "\n";
    for (const auto& [id, r] : state.reports) {
        out += serialize_report(r);
        out += '\n';
    }
    return out;
}

struct HistorySample {
    SimTime window_end_s = 0;
    double grid_total_load_w = 0.0;
    int hour_of_day = 0;
    int day_of_week = 0;
};

inline constexpr SimTime kSecondsPerDay = 86'400;

/// Time-ordered grid totals. Window ends are strictly increasing.
class StateHistory {
public:
    void append(SimTime window_end_s, double grid_total_load_w)
    {
        if (!samples_.empty() && window_end_s <= samples_.back().window_end_s) {
            fail(ErrorCode::InvalidArgument, "history window ends must be strictly increasing");
        }
        const SimTime day = window_end_s / kSecondsPerDay;
        samples_.push_back(HistorySample{window_end_s, grid_total_load_w,
                                         static_cast<int>((window_end_s % kSecondsPerDay) / 3600),
                                         static_cast<int>(day % 7)});
    }

    const std::vector<HistorySample>& samples() const noexcept { return samples_; }
    bool empty() const noexcept { return samples_.empty(); }
    std::size_t size() const noexcept { return samples_.size(); }

    const HistorySample* at(SimTime window_end_s) const
    {
        auto it = std::lower_bound(
            samples_.begin(), samples_.end(), window_end_s,
            [](const HistorySample& s, SimTime t) { return s.window_end_s < t; });
        return it != samples_.end() && it->window_end_s == window_end_s ? &*it : nullptr;
    }

    /// `window_end_s,grid_total_load_w` lines under a header.
    std::string to_csv() const
    {
        std::string out = "window_end_s,grid_total_load_w\n";
        for (const auto& s : samples_) {
            out += std::to_string(s.window_end_s) + "," + format_double(s.grid_total_load_w) + "\n";
        }
        return out;
    }

private:
    std::vector<HistorySample> samples_;
};

/// Seasonal-naive forecast: the load observed exactly one day before the
/// target time, else the last observation.
inline double forecast_load(const StateHistory& history, SimTime horizon_s)
{
    if (history.empty()) {
        fail(ErrorCode::EmptyHistory, "cannot forecast from an empty history");
    }
    if (horizon_s < 0) {
        fail(ErrorCode::InvalidArgument, "forecast horizon must be non-negative");
    }
    const SimTime target = history.samples().back().window_end_s + horizon_s;
    if (const HistorySample* same_time_yesterday = history.at(target - kSecondsPerDay)) {
        return same_time_yesterday->grid_total_load_w;
    }
    return history.samples().back().grid_total_load_w;
}

/// Utility central office. Keeps an append-only report log and derives the
/// grid state and per-window totals from it.
class HeadEnd {
public:
    void receive_report(const OperatingStateReport& report)
    {
        log_.push_back(report);
        window_totals_[report.window_end_s] += report.total_load_w;
    }

    const std::vector<OperatingStateReport>& report_log() const noexcept { return log_; }

    WholeGridState grid_state(SimTime as_of_s) const
    {
        return assemble_grid_state(log_, as_of_s);
    }

    /// Grid totals per window end, summed over every aggregator reporting that window.
    StateHistory history() const
    {
        StateHistory h;
        for (const auto& [end, total] : window_totals_) {
            h.append(end, total);
        }
        return h;
    }

    std::string report_log_text() const
    {
        std::string out;
        for (const auto& r : log_) {
            out += serialize_report(r);
            out += '\n';
        }
        return out;
    }

private:
    std::vector<OperatingStateReport> log_;
    std::map<SimTime, double> window_totals_;
};

} // namespace amisim
