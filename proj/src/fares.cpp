#include "ridegfl/fares.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ridegfl {

void Tariff::validate() const
{
    auto check = [](const RateSet& r, std::string_view what) {
        if (r.base < 0 || r.per_minute < 0 || r.per_mile < 0 || r.minimum < 0) {
            throw ConfigError("tariff components must be non-negative (" + std::string(what) + ")");
        }
        if (r.minimum < r.base) throw ConfigError("minimum fare below base fare (" + std::string(what) + ")");
    };
    check(standard, "standard");
    for (const auto& [cls, r] : class_rates) check(r, to_string(cls));
}

double flat_fare(double duration, double distance, const RateSet& rates)
{
    if (!(duration >= 0.0) || !(distance >= 0.0)) throw std::domain_error("fare inputs must be non-negative");
    return std::max(rates.base + rates.per_minute * duration + rates.per_mile * distance, rates.minimum);
}

double surge_fare(double flat, double alpha)
{
    if (!(alpha > 0.0)) throw std::domain_error("surge factor must be positive");
    return alpha * flat;
}

double normalize_to_standard(const TripRecord& trip, const Tariff& tariff)
{
    if (!tariff.class_rates.empty() && !tariff.class_rates.contains(trip.vehicle_class)) {
        throw Rejection("unknown-vehicle-class");
    }
    return flat_fare(trip.duration, trip.distance, tariff.standard);
}

double trip_fare(const TripRecord& trip, const Tariff& tariff, FareMode mode)
{
    const double flat = normalize_to_standard(trip, tariff);
    return mode == FareMode::surge ? surge_fare(flat, trip.surge_factor) : flat;
}

double unproductive_time(double idle, double reach)
{
    if (!(idle >= 0.0) || !(reach >= 0.0)) throw std::domain_error("idle and reach times must be non-negative");
    return idle + reach;
}

std::string_view to_string(MetricKind k)
{
    return k == MetricKind::continuation_payoff ? "continuation_payoff" : "driver_productivity";
}

double continuation_rate(double fare_second, double unproductive, double time_second)
{
    const double denom = unproductive + time_second;
    if (!(denom > 0.0)) throw Rejection("zero-denominator");
    return 60.0 * fare_second / denom;
}

double two_trip_rate(double fare_first, double time_first, double unproductive, double fare_second,
                     double time_second)
{
    const double denom = time_first + unproductive + time_second;
    if (!(denom > 0.0)) throw Rejection("zero-denominator");
    return 60.0 * (fare_first + fare_second) / denom;
}

namespace {

void check_value(double v)
{
    if (!std::isfinite(v) || v < 0.0) throw Rejection("non-finite-value");
}

} // namespace

ProductivitySample continuation_payoff(const DriverTransition& tr, FareMode mode, const Tariff& tariff)
{
    ProductivitySample s;
    s.kind = MetricKind::continuation_payoff;
    s.anchor_zone = tr.first.dest_zone;
    s.period = tr.first.dropoff_period;
    s.fare_mode = mode;
    s.components.unproductive = unproductive_time(tr.idle_time, tr.reach_time);
    s.components.fare_second = trip_fare(tr.second.trip, tariff, mode);
    s.components.time_second = tr.second.trip.duration;
    s.value = continuation_rate(s.components.fare_second, s.components.unproductive, s.components.time_second);
    check_value(s.value);
    return s;
}

ProductivitySample driver_productivity(const DriverTransition& tr, FareMode mode, const Tariff& tariff)
{
    ProductivitySample s;
    s.kind = MetricKind::driver_productivity;
    s.anchor_zone = tr.first.dest_zone;
    s.period = tr.first.period;
    s.fare_mode = mode;
    s.components.fare_first = trip_fare(tr.first.trip, tariff, mode);
    s.components.time_first = tr.first.trip.duration;
    s.components.unproductive = unproductive_time(tr.idle_time, tr.reach_time);
    s.components.fare_second = trip_fare(tr.second.trip, tariff, mode);
    s.components.time_second = tr.second.trip.duration;
    s.value = two_trip_rate(s.components.fare_first, s.components.time_first, s.components.unproductive,
                            s.components.fare_second, s.components.time_second);
    check_value(s.value);
    return s;
}

ProductivityDecomposition decompose_rates(double fare_first, double time_first, double unproductive,
                                          double fare_second, double time_second)
{
    if (!(time_first > 0.0)) throw Rejection("zero-first-duration");
    const double total = time_first + unproductive + time_second;
    ProductivityDecomposition d;
    d.first_weight = time_first / total;
    d.first_hourly = 60.0 * fare_first / time_first;
    d.continuation_weight = (unproductive + time_second) / total;
    // u + t2 = 0 leaves the continuation term with zero weight.
    d.continuation = unproductive + time_second > 0.0 ? continuation_rate(fare_second, unproductive, time_second) : 0.0;
    return d;
}

ProductivityDecomposition productivity_decomposition(const DriverTransition& tr, FareMode mode, const Tariff& tariff)
{
    return decompose_rates(trip_fare(tr.first.trip, tariff, mode), tr.first.trip.duration,
                           unproductive_time(tr.idle_time, tr.reach_time), trip_fare(tr.second.trip, tariff, mode),
                           tr.second.trip.duration);
}

std::vector<DriverTransition> experiment_filter(const std::vector<DriverTransition>& transitions,
                                                const std::set<ZoneId>& origins, FilterReport* report)
{
    if (origins.empty()) throw std::invalid_argument("experiment origin set is empty");
    std::vector<DriverTransition> out;
    std::copy_if(transitions.begin(), transitions.end(), std::back_inserter(out),
                 [&](const DriverTransition& t) { return origins.contains(t.first.origin_zone); });
    if (report) *report = FilterReport{transitions.size(), out.size()};
    return out;
}

} // namespace ridegfl
