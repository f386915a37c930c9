#pragma once

#include "amisim/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace amisim {

struct DistanceVoltage {
    double distance_m = 0.0;
    double voltage_v = 0.0;
};

/// Degree-2 least-squares characterization of a voltage-vs-distance profile.
///
/// Coefficients live in the normalized coordinate x = (d - norm_center) / norm_scale,
/// where the centre is the midpoint of the fitted distance span and the scale is
/// its half-width. The fitted span is therefore [center - scale, center + scale],
/// which keeps the serialized form self-describing.
struct PolyFit {
    double c0 = 0.0;
    double c1 = 0.0;
    double c2 = 0.0;
    double r_squared = 0.0;
    double norm_center = 0.0;
    double norm_scale = 1.0;

    double normalize(double distance_m) const noexcept
    {
        return (distance_m - norm_center) / norm_scale;
    }

    double evaluate_normalized(double x) const noexcept { return c0 + x * (c1 + x * c2); }

    double distance_min() const noexcept { return norm_center - norm_scale; }
    double distance_max() const noexcept { return norm_center + norm_scale; }

    /// Coefficients {a0, a1, a2} of V(d) = a0 + a1 d + a2 d^2 in raw metres.
    std::array<double, 3> denormalized() const noexcept
    {
        const double m = norm_center;
        const double s = norm_scale;
        return {c0 - c1 * m / s + c2 * m * m / (s * s), c1 / s - 2.0 * c2 * m / (s * s),
                c2 / (s * s)};
    }
};

namespace detail {

/// Solves min ||A c - y|| for an m x 3 matrix given by rows, via Householder QR.
inline std::array<double, 3> householder_lstsq3(std::vector<std::array<double, 3>> rows,
                                                std::vector<double> rhs)
{
    const std::size_t m = rows.size();
    for (std::size_t k = 0; k < 3; ++k) {
        double norm = 0.0;
        for (std::size_t i = k; i < m; ++i) {
            norm = std::hypot(norm, rows[i][k]);
        }
        if (norm == 0.0) {
            fail(ErrorCode::InsufficientData, "rank-deficient design matrix");
        }
        const double alpha = rows[k][k] > 0.0 ? -norm : norm;
        // v = a_k - alpha e_k
        std::vector<double> v(m - k);
        for (std::size_t i = k; i < m; ++i) {
            v[i - k] = rows[i][k];
        }
        v[0] -= alpha;
        double vnorm2 = 0.0;
        for (double vi : v) {
            vnorm2 += vi * vi;
        }
        if (vnorm2 == 0.0) {
            continue;
        }
        for (std::size_t j = k; j < 3; ++j) {
            double dot = 0.0;
            for (std::size_t i = k; i < m; ++i) {
                dot += v[i - k] * rows[i][j];
            }
            const double f = 2.0 * dot / vnorm2;
            for (std::size_t i = k; i < m; ++i) {
                rows[i][j] -= f * v[i - k];
            }
        }
        double dot = 0.0;
        for (std::size_t i = k; i < m; ++i) {
            dot += v[i - k] * rhs[i];
        }
        const double f = 2.0 * dot / vnorm2;
        for (std::size_t i = k; i < m; ++i) {
            rhs[i] -= f * v[i - k];
        }
    }
    std::array<double, 3> c{};
    for (std::size_t k = 3; k-- > 0;) {
        double acc = rhs[k];
        for (std::size_t j = k + 1; j < 3; ++j) {
            acc -= rows[k][j] * c[j];
        }
        if (rows[k][k] == 0.0) {
            fail(ErrorCode::InsufficientData, "rank-deficient design matrix");
        }
        c[k] = acc / rows[k][k];
    }
    return c;
}

} // namespace detail

inline std::size_t distinct_distance_count(std::span<const DistanceVoltage> samples)
{
    std::set<double> distances;
    for (const auto& s : samples) {
        distances.insert(s.distance_m);
    }
    return distances.size();
}

/// Least-squares quadratic through (distance, voltage) samples. Requires at
/// least three distinct distances. R^2 = 1 - SS_res/SS_tot, defined as 1 when
/// the voltages are all equal.
inline PolyFit fit_feeder_polynomial(std::span<const DistanceVoltage> samples)
{
    const std::size_t distinct = distinct_distance_count(samples);
    if (distinct < 3) {
        fail(ErrorCode::InsufficientData,
             "need >= 3 distinct distances, got " + std::to_string(distinct));
    }
    const auto [lo_it, hi_it] = std::minmax_element(
        samples.begin(), samples.end(),
        [](const auto& a, const auto& b) { return a.distance_m < b.distance_m; });

    PolyFit fit;
    fit.norm_center = 0.5 * (lo_it->distance_m + hi_it->distance_m);
    fit.norm_scale = 0.5 * (hi_it->distance_m - lo_it->distance_m);

    std::vector<std::array<double, 3>> rows;
    std::vector<double> rhs;
    rows.reserve(samples.size());
    rhs.reserve(samples.size());
    for (const auto& s : samples) {
        const double x = fit.normalize(s.distance_m);
        rows.push_back({1.0, x, x * x});
        rhs.push_back(s.voltage_v);
    }
    const auto c = detail::householder_lstsq3(std::move(rows), rhs);
    fit.c0 = c[0];
    fit.c1 = c[1];
    fit.c2 = c[2];

    double mean = 0.0;
    for (double y : rhs) {
        mean += y;
    }
    mean /= static_cast<double>(rhs.size());
    double ss_tot = 0.0;
    double ss_res = 0.0;
    for (const auto& s : samples) {
        const double dt = s.voltage_v - mean;
        const double dr = s.voltage_v - fit.evaluate_normalized(fit.normalize(s.distance_m));
        ss_tot += dt * dt;
        ss_res += dr * dr;
    }
    const bool constant = std::all_of(rhs.begin(), rhs.end(), [&](double y) { return y == rhs.front(); });
    fit.r_squared = constant || ss_tot == 0.0 ? 1.0 : std::clamp(1.0 - ss_res / ss_tot, 0.0, 1.0);
    return fit;
}

/// Voltage predicted by a characterizing fit; only valid inside the fitted span.
inline double estimate_voltage(const PolyFit& fit, double distance_m)
{
    const double slack = 1e-12 * std::max(1.0, std::abs(fit.norm_scale));
    if (!(distance_m >= fit.distance_min() - slack && distance_m <= fit.distance_max() + slack)) {
        fail(ErrorCode::Extrapolation, "distance " + std::to_string(distance_m) +
                                           " m outside fitted span [" +
                                           std::to_string(fit.distance_min()) + ", " +
                                           std::to_string(fit.distance_max()) + "]");
    }
    return fit.evaluate_normalized(fit.normalize(distance_m));
}

} // namespace amisim
