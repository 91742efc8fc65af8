#pragma once

#include <map>
#include <set>
#include <vector>

#include "ridegfl/trips.hpp"
#include "ridegfl/types.hpp"

namespace ridegfl {

/// Driver rate card. Defaults are the standard-class rates.
struct RateSet {
    double base = 1.50;       // $
    double per_minute = 0.25; // $/min
    double per_mile = 0.99;   // $/mile
    double minimum = 4.00;    // $
};

struct Tariff {
    RateSet standard;
    /// Rates per vehicle class. Carried for configuration completeness;
    /// fares are always recomputed with `standard`.
    std::map<VehicleClass, RateSet> class_rates = {
        {VehicleClass::standard, {}}, {VehicleClass::premium, {}}, {VehicleClass::luxury, {}}, {VehicleClass::suv, {}}};

    /// Throws ConfigError unless every component is >= 0 and minimum >= base.
    void validate() const;
};

/// max(base + per_minute * duration + per_mile * distance, minimum).
/// Throws std::domain_error for negative inputs.
double flat_fare(double duration, double distance, const RateSet& rates = {});

/// alpha * flat. Throws std::domain_error for alpha <= 0.
double surge_fare(double flat, double alpha);

/// Standard-class flat fare for the trip, whatever its vehicle class.
/// Rejects ("unknown-vehicle-class") a class missing from the tariff table.
double normalize_to_standard(const TripRecord& trip, const Tariff& tariff);

/// The fare of one trip under the given mode (surge uses the trip's own alpha).
double trip_fare(const TripRecord& trip, const Tariff& tariff, FareMode mode);

double unproductive_time(double idle, double reach);

enum class MetricKind : std::uint8_t { continuation_payoff, driver_productivity };

std::string_view to_string(MetricKind k);

/// Inputs retained with every sample so the value can be audited.
struct SampleComponents {
    double fare_first = 0.0;   // F_rs (0 for continuation payoff)
    double time_first = 0.0;   // t_rs (0 for continuation payoff)
    double unproductive = 0.0; // u = idle + reach
    double fare_second = 0.0;  // F_r*s*
    double time_second = 0.0;  // t_r*s*
};

struct ProductivitySample {
    MetricKind kind = MetricKind::continuation_payoff;
    double value = 0.0; // $/hour
    ZoneId anchor_zone;
    PeriodBin period = PeriodBin::other_weekday;
    FareMode fare_mode = FareMode::flat;
    SampleComponents components;
};

/// 60 * F2 / (u + t2), $/hour. Rejects a zero denominator.
double continuation_rate(double fare_second, double unproductive, double time_second);

/// 60 * (F1 + F2) / (t1 + u + t2), $/hour. Rejects a zero denominator.
double two_trip_rate(double fare_first, double time_first, double unproductive, double fare_second,
                     double time_second);

/// Continuation payoff of Trip 1's destination, anchored to Trip 1's
/// destination zone and drop-off period.
ProductivitySample continuation_payoff(const DriverTransition& tr, FareMode mode, const Tariff& tariff = {});

/// Two-trip productivity anchored to Trip 1's destination zone and pickup period.
ProductivitySample driver_productivity(const DriverTransition& tr, FareMode mode, const Tariff& tariff = {});

/// Weighted-average form of the two-trip productivity:
/// value = first_weight * first_hourly + continuation_weight * continuation.
struct ProductivityDecomposition {
    double first_weight = 0.0;
    double first_hourly = 0.0;
    double continuation_weight = 0.0;
    double continuation = 0.0;

    double combined() const noexcept { return first_weight * first_hourly + continuation_weight * continuation; }
};

ProductivityDecomposition decompose_rates(double fare_first, double time_first, double unproductive,
                                          double fare_second, double time_second);

ProductivityDecomposition productivity_decomposition(const DriverTransition& tr, FareMode mode,
                                                     const Tariff& tariff = {});

struct FilterReport {
    std::size_t input = 0;
    std::size_t retained = 0;
};

/// Transitions whose first trip starts in one of `origins`. Throws
/// std::invalid_argument when `origins` is empty.
std::vector<DriverTransition> experiment_filter(const std::vector<DriverTransition>& transitions,
                                                const std::set<ZoneId>& origins, FilterReport* report = nullptr);

} // namespace ridegfl
