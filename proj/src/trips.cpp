#include "ridegfl/trips.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <istream>
#include <unordered_map>
#include <unordered_set>

#include <boost/date_time/local_time/local_time.hpp>

#include "ridegfl/delimited.hpp"

namespace ridegfl {

namespace bpt = boost::posix_time;
namespace blt = boost::local_time;
namespace bg = boost::gregorian;

struct TimeZone::Impl {
    blt::time_zone_ptr tz;
};

namespace {

const bpt::ptime& epoch()
{
    static const bpt::ptime e(bg::date(1970, 1, 1));
    return e;
}

bpt::ptime to_ptime(Timestamp ts)
{
    return epoch() + bpt::milliseconds(ts.time_since_epoch().count());
}

Timestamp from_ptime(const bpt::ptime& p)
{
    return Timestamp(std::chrono::milliseconds((p - epoch()).total_milliseconds()));
}

std::string posix_rule_for(std::string_view name)
{
    // Boost's POSIX zone strings use the sign of the UTC offset, not its negation.
    static const std::map<std::string, std::string, std::less<>> aliases = {
        {"UTC", "UTC+00"},
        {"Etc/UTC", "UTC+00"},
        {"America/Chicago", "CST-06CDT+01,M3.2.0/02:00,M11.1.0/02:00"},
        {"US/Central", "CST-06CDT+01,M3.2.0/02:00,M11.1.0/02:00"},
        {"America/New_York", "EST-05EDT+01,M3.2.0/02:00,M11.1.0/02:00"},
        {"America/Denver", "MST-07MDT+01,M3.2.0/02:00,M11.1.0/02:00"},
        {"America/Los_Angeles", "PST-08PDT+01,M3.2.0/02:00,M11.1.0/02:00"},
    };
    if (auto it = aliases.find(name); it != aliases.end()) return it->second;
    return std::string(name);
}

int to_int(std::string_view s, bool& ok)
{
    if (s.empty()) {
        ok = false;
        return 0;
    }
    int v = 0;
    for (char c : s) {
        if (!std::isdigit(static_cast<unsigned char>(c))) {
            ok = false;
            return 0;
        }
        v = v * 10 + (c - '0');
    }
    return v;
}

std::string lower(std::string_view s)
{
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

} // namespace

TimeZone::TimeZone() : TimeZone(from_name("UTC")) {}

TimeZone TimeZone::from_name(std::string_view name)
{
    const std::string rule = posix_rule_for(name);
    try {
        auto impl = std::make_shared<Impl>();
        impl->tz.reset(new blt::posix_time_zone(rule));
        return TimeZone(std::move(impl), std::string(name));
    } catch (const std::exception& e) {
        throw ConfigError("unrecognised time zone '" + std::string(name) + "': " + e.what());
    }
}

LocalClock TimeZone::to_local(Timestamp ts) const
{
    const blt::local_date_time ldt(to_ptime(ts), impl_->tz);
    const bpt::ptime local = ldt.local_time();
    const auto tod = local.time_of_day();
    return LocalClock{static_cast<int>(local.date().day_of_week().as_number()),
                      static_cast<int>(tod.hours()), static_cast<int>(tod.minutes())};
}

Timestamp TimeZone::from_local(int year, int month, int day, std::chrono::milliseconds time_of_day) const
{
    const bg::date d(static_cast<unsigned short>(year), static_cast<unsigned short>(month),
                     static_cast<unsigned short>(day));
    const bpt::time_duration td = bpt::milliseconds(time_of_day.count());
    blt::local_date_time ldt(d, td, impl_->tz, blt::local_date_time::NOT_DATE_TIME_ON_ERROR);
    if (ldt.is_not_a_date_time()) ldt = blt::local_date_time(d, td, impl_->tz, false);
    return from_ptime(ldt.utc_time());
}

PeriodBin bin_local(const LocalClock& clock, const std::array<bool, 7>& weekend_days)
{
    if (weekend_days.at(static_cast<std::size_t>(clock.weekday))) return PeriodBin::weekend;
    const int h = clock.hour;
    if ((h >= 6 && h < 9) || (h >= 16 && h < 19)) return PeriodBin::weekday_peak;
    if (h >= 10 && h < 15) return PeriodBin::weekday_midday;
    if (h >= 20 || h < 5) return PeriodBin::weekday_overnight;
    return PeriodBin::other_weekday;
}

PeriodBin bin_period(Timestamp ts, const PeriodCalendar& calendar)
{
    return bin_local(calendar.zone.to_local(ts), calendar.weekend_days);
}

bool is_analysis_period(PeriodBin p) noexcept
{
    return p != PeriodBin::other_weekday;
}

std::optional<Timestamp> parse_timestamp(std::string_view text, TimestampBasis basis, const TimeZone& zone)
{
    using namespace std::chrono;
    text = trim(text);
    if (text.empty()) return std::nullopt;

    if (text.find('-', 1) == std::string_view::npos && text.find(':') == std::string_view::npos) {
        const auto secs = parse_double(text);
        if (!secs || !std::isfinite(*secs)) return std::nullopt;
        return Timestamp(milliseconds(static_cast<long long>(std::llround(*secs * 1000.0))));
    }

    // YYYY-MM-DD
    if (text.size() < 16 || text[4] != '-' || text[7] != '-') return std::nullopt;
    bool ok = true;
    const int y = to_int(text.substr(0, 4), ok);
    const int mo = to_int(text.substr(5, 2), ok);
    const int d = to_int(text.substr(8, 2), ok);
    if (text[10] != ' ' && text[10] != 'T') return std::nullopt;
    const int hh = to_int(text.substr(11, 2), ok);
    if (text[13] != ':') return std::nullopt;
    const int mi = to_int(text.substr(14, 2), ok);
    std::size_t pos = 16;
    int ss = 0;
    long long ms = 0;
    if (pos < text.size() && text[pos] == ':') {
        ss = to_int(text.substr(pos + 1, 2), ok);
        pos += 3;
        if (pos < text.size() && text[pos] == '.') {
            std::size_t end = pos + 1;
            while (end < text.size() && std::isdigit(static_cast<unsigned char>(text[end]))) ++end;
            std::string frac(text.substr(pos + 1, end - pos - 1));
            if (frac.empty()) return std::nullopt;
            frac.resize(3, '0');
            ms = to_int(frac, ok);
            pos = end;
        }
    }
    if (!ok) return std::nullopt;

    const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
    if (!ymd.ok() || hh > 23 || mi > 59 || ss > 60) return std::nullopt;
    const milliseconds tod = hours(hh) + minutes(mi) + seconds(ss) + milliseconds(ms);

    std::string_view rest = trim(text.substr(pos));
    if (rest.empty()) {
        if (basis == TimestampBasis::local) return zone.from_local(y, mo, d, tod);
        return Timestamp(sys_days(ymd)) + tod;
    }
    if (rest == "Z" || rest == "UTC" || rest == "+00" || rest == "+00:00") return Timestamp(sys_days(ymd)) + tod;
    if (rest.front() != '+' && rest.front() != '-') return std::nullopt;
    const int sign = rest.front() == '+' ? 1 : -1;
    rest.remove_prefix(1);
    int oh = 0;
    int om = 0;
    if (rest.size() == 5 && rest[2] == ':') {
        oh = to_int(rest.substr(0, 2), ok);
        om = to_int(rest.substr(3, 2), ok);
    } else if (rest.size() == 4) {
        oh = to_int(rest.substr(0, 2), ok);
        om = to_int(rest.substr(2, 2), ok);
    } else if (rest.size() == 2) {
        oh = to_int(rest, ok);
    } else {
        return std::nullopt;
    }
    if (!ok) return std::nullopt;
    return Timestamp(sys_days(ymd)) + tod - sign * (hours(oh) + minutes(om));
}

TripSchema TripSchema::identity()
{
    TripSchema s;
    for (const auto& f : required_fields()) s.columns[f] = f;
    for (const auto& f : optional_fields()) s.columns[f] = f;
    return s;
}

const std::vector<std::string>& TripSchema::required_fields()
{
    static const std::vector<std::string> fields = {
        "trip_id",    "driver_id",  "dispatch_ts",  "pickup_ts",   "dropoff_ts", "pickup_lon",
        "pickup_lat", "dropoff_lon", "dropoff_lat", "distance",    "duration",
    };
    return fields;
}

const std::vector<std::string>& TripSchema::optional_fields()
{
    static const std::vector<std::string> fields = {"surge_factor", "vehicle_class"};
    return fields;
}

std::optional<VehicleClass> parse_vehicle_class(std::string_view s, const std::map<std::string, VehicleClass>& aliases)
{
    const std::string key = lower(trim(s));
    if (key.empty() || key == "standard" || key == "regular") return VehicleClass::standard;
    if (key == "premium") return VehicleClass::premium;
    if (key == "luxury") return VehicleClass::luxury;
    if (key == "suv") return VehicleClass::suv;
    for (const auto& [alias, cls] : aliases) {
        if (lower(alias) == key) return cls;
    }
    return std::nullopt;
}

ParsedTrips parse_trips(std::istream& in, const TripSchema& schema, const TimeZone& zone)
{
    ParsedTrips out;
    std::vector<std::string> header;
    if (!read_record(in, schema.delimiter, header)) throw ConfigError("trip file is empty (no header row)");

    std::unordered_map<std::string, std::size_t> column_index;
    for (std::size_t i = 0; i < header.size(); ++i) column_index.emplace(std::string(trim(header[i])), i);

    auto column_for = [&](const std::string& logical) -> std::optional<std::size_t> {
        auto it = schema.columns.find(logical);
        const std::string& name = it == schema.columns.end() ? logical : it->second;
        if (auto c = column_index.find(name); c != column_index.end()) return c->second;
        return std::nullopt;
    };

    std::map<std::string, std::size_t> idx;
    for (const auto& f : TripSchema::required_fields()) {
        auto c = column_for(f);
        if (!c) {
            auto it = schema.columns.find(f);
            throw ConfigError("required trip column missing: " + f + " (expected header '" +
                              (it == schema.columns.end() ? f : it->second) + "')");
        }
        idx[f] = *c;
    }
    const auto surge_col = column_for("surge_factor");
    const auto class_col = column_for("vehicle_class");

    std::vector<std::string> row;
    while (read_record(in, schema.delimiter, row)) {
        ++out.report.rows;
        try {
            if (row.size() < header.size()) throw Rejection("column-count");
            auto field = [&](const char* name) -> std::string_view { return trim(row[idx.at(name)]); };
            auto number = [&](std::string_view v) {
                auto d = parse_double(v);
                if (!d || !std::isfinite(*d)) throw Rejection("bad-number");
                return *d;
            };
            auto stamp = [&](std::string_view v) {
                auto t = parse_timestamp(v, schema.basis, zone);
                if (!t) throw Rejection("bad-timestamp");
                return *t;
            };

            TripRecord t;
            t.trip_id = std::string(field("trip_id"));
            t.driver_id = std::string(field("driver_id"));
            if (t.trip_id.empty() || t.driver_id.empty()) throw Rejection("missing-id");
            t.dispatch_ts = stamp(field("dispatch_ts"));
            t.pickup_ts = stamp(field("pickup_ts"));
            t.dropoff_ts = stamp(field("dropoff_ts"));
            t.pickup_point = {number(field("pickup_lon")), number(field("pickup_lat"))};
            t.dropoff_point = {number(field("dropoff_lon")), number(field("dropoff_lat"))};
            t.distance = number(field("distance")) * schema.distance_to_miles;
            t.duration = number(field("duration")) * schema.duration_to_minutes;
            if (surge_col) {
                const auto v = trim(row[*surge_col]);
                t.surge_factor = v.empty() ? 1.0 : number(v);
            }
            if (class_col) {
                auto cls = parse_vehicle_class(row[*class_col], schema.class_aliases);
                if (!cls) throw Rejection("unknown-vehicle-class");
                t.vehicle_class = *cls;
            }

            if (t.dispatch_ts > t.pickup_ts || t.pickup_ts > t.dropoff_ts) throw Rejection("timestamp-order");
            if (t.distance < 0.0) throw Rejection("negative-distance");
            if (t.duration < 0.0) throw Rejection("negative-duration");
            if (std::abs(t.duration - minutes_between(t.pickup_ts, t.dropoff_ts)) > schema.duration_tolerance) {
                throw Rejection("duration-mismatch");
            }
            if (!(t.surge_factor > 0.0)) throw Rejection("nonpositive-surge");

            out.trips.push_back(std::move(t));
            ++out.report.accepted;
        } catch (const Rejection& r) {
            ++out.report.rejected[r.reason()];
        }
    }
    return out;
}

namespace {

bool chain_order(const ZonedTrip& a, const ZonedTrip& b)
{
    if (a.trip.driver_id != b.trip.driver_id) return a.trip.driver_id < b.trip.driver_id;
    if (a.trip.dropoff_ts != b.trip.dropoff_ts) return a.trip.dropoff_ts < b.trip.dropoff_ts;
    return a.trip.trip_id < b.trip.trip_id;
}

} // namespace

std::size_t drop_duplicate_trips(std::vector<ZonedTrip>& trips)
{
    std::stable_sort(trips.begin(), trips.end(), chain_order);
    std::size_t removed = 0;
    std::vector<ZonedTrip> kept;
    kept.reserve(trips.size());
    std::unordered_set<std::string> seen;
    std::string current_driver;
    for (auto& t : trips) {
        if (kept.empty() || t.trip.driver_id != current_driver) {
            current_driver = t.trip.driver_id;
            seen.clear();
        }
        if (!seen.insert(t.trip.trip_id).second) {
            ++removed;
            continue;
        }
        kept.push_back(std::move(t));
    }
    trips = std::move(kept);
    return removed;
}

ChainResult chain_driver_transitions(std::vector<ZonedTrip> trips, double idle_cap)
{
    if (!(idle_cap > 0.0)) throw std::invalid_argument("idle cap must be positive");
    ChainResult result;
    result.report.duplicate_trips = drop_duplicate_trips(trips);

    for (std::size_t i = 1; i < trips.size(); ++i) {
        const ZonedTrip& a = trips[i - 1];
        const ZonedTrip& b = trips[i];
        if (a.trip.driver_id != b.trip.driver_id) continue;
        ++result.report.adjacent_pairs;
        const double idle = minutes_between(a.trip.dropoff_ts, b.trip.dispatch_ts);
        if (idle < 0.0) {
            ++result.report.excluded["negative-idle"];
            continue;
        }
        if (idle >= idle_cap) {
            ++result.report.excluded["idle-cap"];
            continue;
        }
        result.transitions.push_back(
            DriverTransition{a, b, idle, minutes_between(b.trip.dispatch_ts, b.trip.pickup_ts)});
    }
    result.report.emitted = result.transitions.size();
    return result;
}

} // namespace ridegfl
