#pragma once

// Audit harness: report anonymity checks, data-reduction accounting, raw
// buffer exposure, and a Monte Carlo measure of how many distinct load
// configurations map onto one operating-state report.

#include "amisim/aggregator.hpp"
#include "amisim/error.hpp"
#include "amisim/feeder.hpp"
#include "amisim/format.hpp"
#include "amisim/metering.hpp"
#include "amisim/rng.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace amisim {

struct Violation {
    std::string field_path;
    std::string kind;
};

struct AuditResult {
    bool passed = true;
    std::vector<Violation> violations;
};

namespace detail {

/// Substring search for any known serial, bucketed by serial length.
class SerialMatcher {
public:
    explicit SerialMatcher(const std::set<std::string>& serials) : serials_(serials)
    {
        for (const auto& s : serials_) {
            if (!s.empty()) {
                lengths_.insert(s.size());
            }
        }
    }

    bool contains_any(std::string_view text) const
    {
        for (std::size_t len : lengths_) {
            for (std::size_t pos = 0; pos + len <= text.size(); ++pos) {
                if (serials_.contains(std::string(text.substr(pos, len)))) {
                    return true;
                }
            }
        }
        return false;
    }

private:
    const std::set<std::string>& serials_;
    std::set<std::size_t> lengths_;
};

inline bool looks_like_sequence(std::string_view value)
{
    return value.find_first_of(",;[]{}|") != std::string_view::npos;
}

} // namespace detail

/// Checks one serialized report line: no known serial anywhere, no per-meter
/// sequences, no fields beyond the documented schema.
inline AuditResult audit_report(std::string_view serialized_report,
                                const std::set<std::string>& known_serials)
{
    const RecordFields fields = split_record(serialized_report);
    std::set<std::string> present;
    for (const auto& [key, value] : fields) {
        present.insert(key);
    }
    for (auto name : kReportFieldNames) {
        if (!present.contains(std::string(name))) {
            fail(ErrorCode::MalformedRecord, "missing field '" + std::string(name) + "'");
        }
    }

    const detail::SerialMatcher matcher(known_serials);
    AuditResult result;
    for (const auto& [key, value] : fields) {
        const bool documented = std::find(kReportFieldNames.begin(), kReportFieldNames.end(),
                                          key) != kReportFieldNames.end();
        if (matcher.contains_any(key) || matcher.contains_any(value)) {
            result.violations.push_back({key, "serial_occurrence"});
        } else if (detail::looks_like_sequence(value)) {
            result.violations.push_back({key, "per_meter_sequence"});
        } else if (!documented) {
            result.violations.push_back({key, "unexpected_field"});
        } else if (key != "aggregator_id") {
            double v = 0.0;
            if (!parse_double(value, v)) {
                result.violations.push_back({key, "non_scalar_value"});
            }
        }
    }
    result.passed = result.violations.empty();
    return result;
}

struct ReductionStats {
    std::size_t raw_values_count = 0;
    std::size_t report_values_count = 0;
    double reduction_factor = 0.0;
};

/// Ratio of raw to reported quantities (scalar values or bytes alike).
inline ReductionStats reduction_factor(std::size_t raw_count, std::size_t report_count)
{
    if (raw_count == 0 || report_count == 0) {
        fail(ErrorCode::EmptyWindow, "reduction needs raw and report data in the window");
    }
    return ReductionStats{raw_count, report_count,
                          static_cast<double>(raw_count) / static_cast<double>(report_count)};
}

/// Value-count reduction for a window: each reading carries five scalars,
/// each report fifteen.
inline ReductionStats reduction_factor_for_window(std::size_t meters,
                                                  std::size_t readings_per_meter,
                                                  std::size_t reports)
{
    return reduction_factor(meters * readings_per_meter * kReadingValueCount,
                            reports * kReportValueCount);
}

/// Age of the oldest retained reading relative to the buffer clock.
inline SimTime buffer_exposure_window(const RawDataBuffer& buffer)
{
    const auto oldest = buffer.oldest_timestamp();
    return oldest ? buffer.now() - *oldest : 0;
}

struct AmbiguityResult {
    std::size_t trials = 0;
    std::size_t indistinguishable_count = 0;
    /// Absolute bound on fit coefficients and voltage aggregates (volts).
    double tolerance = 0.0;
    /// Relative bound on total load.
    double total_tolerance = 0.0;
    /// Load-space dimensions left unconstrained by the report.
    std::size_t free_dimensions = 0;
    /// The report pins the load vector down completely.
    bool low_dimension = false;
    /// Mean relative L2 distance of accepted pre-images from their centroid.
    double mean_relative_spread = 0.0;
};

inline constexpr double kAmbiguityCoefficientTolerance = 1e-3;
inline constexpr double kAmbiguityTotalTolerance = 1e-3;
/// Pre-images closer than this (relative L2) to the centroid are not counted as distinct.
inline constexpr double kAmbiguityDistinctness = 1e-2;

namespace detail {

inline constexpr std::size_t kFeatureCount = 7;
using Features = std::array<double, kFeatureCount>;

/// The report quantities a load vector determines: fit coefficients, total
/// load and the voltage aggregates.
inline Features report_features(const OperatingStateReport& r)
{
    return {r.fit->c0,       r.fit->c1,        r.fit->c2,       r.total_load_w,
            r.voltage_min_v, r.voltage_max_v, r.voltage_mean_v};
}

/// Full forward pipeline for a hypothetical load vector: feeder solve, meter
/// readings into a raw buffer, report extraction.
inline OperatingStateReport forward_report(const FeederTopology& topology,
                                           std::span<const double> loads, SimTime t)
{
    const VoltageProfile profile = solve_voltage_profile(topology, loads);
    std::map<std::string, double> positions;
    std::set<std::string> group;
    std::vector<MeterReading> readings;
    for (std::size_t k = 0; k < topology.house_count; ++k) {
        std::string serial = "h" + std::to_string(k + 1);
        positions.emplace(serial, profile.distance_m[k]);
        group.insert(serial);
        readings.push_back(MeterReading{serial, t, profile.voltage_v[k], loads[k], 0.0,
                                        ServiceState::Connected});
    }
    RawDataBuffer buffer(std::move(group), 1);
    for (auto& r : readings) {
        buffer.ingest(std::move(r));
    }
    return build_report(buffer, ReportWindow{t - 1, t}, positions, "probe",
                        topology.source_voltage_v);
}

} // namespace detail

/// Counts how many randomly drawn load vectors, steered onto the set of
/// non-negative loads that reproduce the report, yield a report within
/// tolerance while being genuinely different load configurations.
///
/// Each trial draws i.i.d. uniform loads rescaled to the reported total, then
/// alternates projections between the report's pre-image (an affine subspace,
/// the pipeline being linear in load) and the non-negative orthant. The
/// resulting vector is pushed through the real forward pipeline and compared
/// with the report.
inline AmbiguityResult reconstruction_ambiguity(const OperatingStateReport& report,
                                                const FeederTopology& topology,
                                                std::size_t trials, std::uint64_t seed)
{
    if (report.degraded()) {
        fail(ErrorCode::DegradedReport, "ambiguity needs a fitted report");
    }
    if (trials == 0) {
        fail(ErrorCode::ZeroTrials, "at least one trial is required");
    }
    const std::size_t n = topology.house_count;
    if (report.meter_count != n) {
        fail(ErrorCode::DimensionMismatch, "report covers " + std::to_string(report.meter_count) +
                                               " meters, topology has " + std::to_string(n));
    }
    using detail::kFeatureCount;
    const SimTime t = std::max<SimTime>(report.window_end_s, 1);
    const double mean_load = report.total_load_w / static_cast<double>(n);
    const double unit = mean_load > 0.0 ? mean_load : 1000.0;

    // Linear model of the pipeline: features(x) = base + J x on x >= 0.
    const std::vector<double> zeros(n, 0.0);
    const auto base = detail::report_features(detail::forward_report(topology, zeros, t));
    Eigen::MatrixXd jac(kFeatureCount, static_cast<Eigen::Index>(n));
    std::vector<double> probe(n, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
        probe[k] = unit;
        const auto f = detail::report_features(detail::forward_report(topology, probe, t));
        probe[k] = 0.0;
        for (std::size_t i = 0; i < kFeatureCount; ++i) {
            jac(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = (f[i] - base[i]) / unit;
        }
    }
    const auto target = detail::report_features(report);
    Eigen::VectorXd rhs(kFeatureCount);
    for (std::size_t i = 0; i < kFeatureCount; ++i) {
        rhs(static_cast<Eigen::Index>(i)) = target[i] - base[i];
    }
    // Row equilibration: volts and watts differ by orders of magnitude.
    for (Eigen::Index i = 0; i < jac.rows(); ++i) {
        const double norm = jac.row(i).norm();
        if (norm > 0.0) {
            jac.row(i) /= norm;
            rhs(i) /= norm;
        }
    }
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod;
    cod.setThreshold(1e-10);
    cod.compute(jac);

    auto project_affine = [&](Eigen::VectorXd& x) {
        const Eigen::VectorXd residual = jac * x - rhs;
        x -= cod.solve(residual);
    };

    AmbiguityResult result;
    result.trials = trials;
    result.tolerance = kAmbiguityCoefficientTolerance;
    result.total_tolerance = kAmbiguityTotalTolerance;
    result.free_dimensions = n - static_cast<std::size_t>(cod.rank());
    result.low_dimension = result.free_dimensions == 0;

    auto rng = RandomStream::fork(seed, "ambiguity");
    std::vector<Eigen::VectorXd> accepted;
    accepted.reserve(trials);
    for (std::size_t trial = 0; trial < trials; ++trial) {
        Eigen::VectorXd x(static_cast<Eigen::Index>(n));
        double sum = 0.0;
        for (Eigen::Index k = 0; k < x.size(); ++k) {
            x(k) = rng.uniform(0.0, 2.0 * unit);
            sum += x(k);
        }
        x *= report.total_load_w / sum;

        bool feasible = false;
        for (int iter = 0; iter < 200; ++iter) {
            project_affine(x);
            if (x.minCoeff() >= -1e-9 * unit) {
                feasible = true;
                break;
            }
            x = x.cwiseMax(0.0);
        }
        if (!feasible) {
            continue;
        }
        x = x.cwiseMax(0.0);
        const std::vector<double> loads(x.data(), x.data() + x.size());
        const auto candidate = detail::forward_report(topology, loads, t);
        if (candidate.degraded()) {
            continue;
        }
        const auto got = detail::report_features(candidate);
        bool within = std::abs(got[3] - target[3]) <= kAmbiguityTotalTolerance * std::abs(target[3]);
        for (std::size_t i : {0u, 1u, 2u, 4u, 5u, 6u}) {
            within = within && std::abs(got[i] - target[i]) <= kAmbiguityCoefficientTolerance;
        }
        if (within) {
            accepted.push_back(std::move(x));
        }
    }

    if (!accepted.empty()) {
        Eigen::VectorXd centroid = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
        for (const auto& x : accepted) {
            centroid += x;
        }
        centroid /= static_cast<double>(accepted.size());
        const double scale = std::max(centroid.norm(), 1e-12);
        double spread = 0.0;
        for (const auto& x : accepted) {
            const double d = (x - centroid).norm() / scale;
            spread += d;
            if (d >= kAmbiguityDistinctness) {
                ++result.indistinguishable_count;
            }
        }
        result.mean_relative_spread = spread / static_cast<double>(accepted.size());
    }
    return result;
}

} // namespace amisim
