#pragma once

#include <chrono>
#include <compare>
#include <cstdint>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>

namespace ridegfl {

using Timestamp = std::chrono::sys_time<std::chrono::milliseconds>;

/// Minutes between two instants as a real number.
inline double minutes_between(Timestamp from, Timestamp to)
{
    return std::chrono::duration<double, std::ratio<60>>(to - from).count();
}

/// Traffic analysis zone identifier.
///
/// Ordering is "natural": identifiers made only of digits sort first and
/// compare numerically; the rest follow in lexicographic order.
/// All tie-breaks that mention zone-id order use this ordering.
class ZoneId {
public:
    ZoneId() = default;
    explicit ZoneId(std::string value) : value_(std::move(value)) {}

    const std::string& str() const noexcept { return value_; }
    bool empty() const noexcept { return value_.empty(); }

    friend bool operator==(const ZoneId& a, const ZoneId& b) noexcept { return a.value_ == b.value_; }
    friend std::strong_ordering operator<=>(const ZoneId& a, const ZoneId& b) noexcept;

private:
    std::string value_;
};

struct LonLat {
    double lon = 0.0;
    double lat = 0.0;
};

enum class PeriodBin : std::uint8_t {
    weekday_peak,
    weekday_midday,
    weekday_overnight,
    weekend,
    other_weekday,
};

std::string_view to_string(PeriodBin p);
PeriodBin period_from_string(std::string_view s);

enum class VehicleClass : std::uint8_t { standard, premium, luxury, suv };

std::string_view to_string(VehicleClass c);

enum class FareMode : std::uint8_t { flat, surge };

std::string_view to_string(FareMode m);
FareMode fare_mode_from_string(std::string_view s);

/// Counts keyed by reason; ordered so reports print deterministically.
using Tally = std::map<std::string, std::size_t>;

inline std::size_t total(const Tally& t)
{
    std::size_t n = 0;
    for (const auto& [_, c] : t) n += c;
    return n;
}

/// Malformed or inconsistent run configuration.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Zone geometry that cannot be used (degenerate rings, bad JSON, ...).
class ZoneFileError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A single record or sample was rejected; `reason()` is the tally key.
class Rejection : public std::runtime_error {
public:
    explicit Rejection(std::string reason)
        : std::runtime_error(reason), reason_(std::move(reason)) {}
    const std::string& reason() const noexcept { return reason_; }

private:
    std::string reason_;
};

} // namespace ridegfl

template <>
struct std::hash<ridegfl::ZoneId> {
    std::size_t operator()(const ridegfl::ZoneId& z) const noexcept
    {
        return std::hash<std::string>{}(z.str());
    }
};
