#pragma once

// Number formatting and `key=value` record tokenizing shared by the report,
// reading and history formats.

#include "amisim/error.hpp"

#include <charconv>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

namespace amisim {

/// Shortest representation that round-trips exactly; "nan" for NaN.
inline std::string format_double(double v)
{
    if (std::isnan(v)) {
        return "nan";
    }
    char buf[64];
    // Whole numbers below 2^53 print without an exponent; otherwise shortest round-trip.
    const bool whole = std::abs(v) < 9.007199254740992e15 && v == std::trunc(v);
    auto [ptr, ec] = whole ? std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed)
                           : std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc{}) {
        fail(ErrorCode::InvalidArgument, "unformattable value");
    }
    return std::string(buf, ptr);
}

inline std::string_view trim(std::string_view s) noexcept
{
    const auto* ws = " \t\r\n";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
}

inline bool parse_double(std::string_view text, double& out)
{
    text = trim(text);
    if (text == "nan") {
        out = std::nan("");
        return true;
    }
    if (text.empty()) {
        return false;
    }
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
    return ec == std::errc{} && ptr == text.data() + text.size();
}

inline bool parse_int64(std::string_view text, std::int64_t& out)
{
    text = trim(text);
    if (text.empty()) {
        return false;
    }
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
    return ec == std::errc{} && ptr == text.data() + text.size();
}

inline bool parse_uint64(std::string_view text, std::uint64_t& out)
{
    text = trim(text);
    if (text.empty()) {
        return false;
    }
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
    return ec == std::errc{} && ptr == text.data() + text.size();
}

using RecordFields = std::vector<std::pair<std::string, std::string>>;

/// Splits a space-separated `key=value` record. Values may not contain spaces.
inline RecordFields split_record(std::string_view line)
{
    RecordFields fields;
    line = trim(line);
    if (line.empty()) {
        fail(ErrorCode::MalformedRecord, "empty record");
    }
    std::size_t pos = 0;
    while (pos < line.size()) {
        while (pos < line.size() && line[pos] == ' ') {
            ++pos;
        }
        if (pos >= line.size()) {
            break;
        }
        auto end = line.find(' ', pos);
        if (end == std::string_view::npos) {
            end = line.size();
        }
        const std::string_view token = line.substr(pos, end - pos);
        const auto eq = token.find('=');
        if (eq == std::string_view::npos || eq == 0) {
            fail(ErrorCode::MalformedRecord, "token '" + std::string(token) + "' is not key=value");
        }
        fields.emplace_back(std::string(token.substr(0, eq)), std::string(token.substr(eq + 1)));
        pos = end;
    }
    return fields;
}

inline std::vector<std::string> split(std::string_view s, char sep)
{
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (true) {
        const auto next = s.find(sep, pos);
        out.emplace_back(s.substr(pos, next == std::string_view::npos ? std::string_view::npos
                                                                       : next - pos));
        if (next == std::string_view::npos) {
            break;
        }
        pos = next + 1;
    }
    return out;
}

} // namespace amisim
