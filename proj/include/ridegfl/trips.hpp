#pragma once

#include <array>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ridegfl/types.hpp"

namespace ridegfl {

struct TripRecord {
    std::string trip_id;
    std::string driver_id;
    Timestamp dispatch_ts{};
    Timestamp pickup_ts{};
    Timestamp dropoff_ts{};
    LonLat pickup_point;
    LonLat dropoff_point;
    double distance = 0.0; // miles
    double duration = 0.0; // minutes
    double surge_factor = 1.0;
    VehicleClass vehicle_class = VehicleClass::standard;
};

struct ZonedTrip {
    TripRecord trip;
    ZoneId origin_zone;
    ZoneId dest_zone;
    PeriodBin period = PeriodBin::other_weekday;         // pickup period
    PeriodBin dropoff_period = PeriodBin::other_weekday; // drop-off period
};

/// Two consecutive trips of one driver. Times are minutes.
struct DriverTransition {
    ZonedTrip first;
    ZonedTrip second;
    double idle_time = 0.0;  // second dispatch - first drop-off
    double reach_time = 0.0; // second pickup - second dispatch
};

/// Local wall clock in some zone.
struct LocalClock {
    int weekday = 0; // 0 = Sunday ... 6 = Saturday
    int hour = 0;
    int minute = 0;
};

/// A time zone given as an alias ("America/Chicago", "UTC") or as a POSIX
/// rule string such as "CST-06CDT+01,M3.2.0/02:00,M11.1.0/02:00".
class TimeZone {
public:
    TimeZone(); // UTC
    static TimeZone from_name(std::string_view name);

    const std::string& name() const noexcept { return name_; }
    LocalClock to_local(Timestamp ts) const;
    /// Interprets a civil date/time as local wall-clock time. Ambiguous
    /// wall times resolve to standard time.
    Timestamp from_local(int year, int month, int day, std::chrono::milliseconds time_of_day) const;

    struct Impl;

private:
    TimeZone(std::shared_ptr<const Impl> impl, std::string name)
        : impl_(std::move(impl)), name_(std::move(name)) {}

    std::shared_ptr<const Impl> impl_;
    std::string name_;
};

struct PeriodCalendar {
    TimeZone zone;
    std::array<bool, 7> weekend_days{true, false, false, false, false, false, true};
};

PeriodBin bin_local(const LocalClock& clock, const std::array<bool, 7>& weekend_days);
PeriodBin bin_period(Timestamp ts, const PeriodCalendar& calendar);

/// True for the four bins that enter metric aggregation.
bool is_analysis_period(PeriodBin p) noexcept;

enum class TimestampBasis { utc, local };

/// Parses "YYYY-MM-DD[ T]HH:MM[:SS[.fff]]" with an optional "Z" or "+hh:mm"
/// suffix, or a bare number of epoch seconds. Naive values are read according
/// to `basis`. Returns nullopt when unparseable.
std::optional<Timestamp> parse_timestamp(std::string_view text, TimestampBasis basis, const TimeZone& zone);

/// Maps logical trip fields onto input columns.
struct TripSchema {
    std::map<std::string, std::string> columns;
    char delimiter = ',';
    double distance_to_miles = 1.0;
    double duration_to_minutes = 1.0;
    double duration_tolerance = 2.0; // minutes
    TimestampBasis basis = TimestampBasis::utc;
    /// Extra spellings of vehicle classes (matched case-insensitively).
    std::map<std::string, VehicleClass> class_aliases;

    /// Logical names used as column names.
    static TripSchema identity();
    static const std::vector<std::string>& required_fields();
    static const std::vector<std::string>& optional_fields();
};

struct ParseReport {
    std::size_t rows = 0;
    std::size_t accepted = 0;
    Tally rejected;
};

struct ParsedTrips {
    std::vector<TripRecord> trips;
    ParseReport report;
};

/// Reads header-bearing delimited text. Throws ConfigError when a required
/// column is missing; every other problem rejects the row with a reason.
ParsedTrips parse_trips(std::istream& in, const TripSchema& schema, const TimeZone& zone);

std::optional<VehicleClass> parse_vehicle_class(std::string_view s, const std::map<std::string, VehicleClass>& aliases);

/// Removes repeated trip ids within each driver's sequence (first occurrence
/// in (dropoff_ts, trip_id) order is kept). Returns the number removed.
std::size_t drop_duplicate_trips(std::vector<ZonedTrip>& trips);

struct ChainReport {
    std::size_t adjacent_pairs = 0;
    std::size_t emitted = 0;
    std::size_t duplicate_trips = 0;
    Tally excluded; // "negative-idle", "idle-cap"
};

struct ChainResult {
    std::vector<DriverTransition> transitions;
    ChainReport report;
};

/// Groups trips by driver, orders them by (dropoff_ts, trip_id) and pairs
/// neighbours. Pairs with idle < 0 or idle >= idle_cap are excluded.
ChainResult chain_driver_transitions(std::vector<ZonedTrip> trips, double idle_cap = 60.0);

} // namespace ridegfl
