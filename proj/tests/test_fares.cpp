#include <doctest.h>

#include <cmath>
#include <random>

#include "ridegfl/fares.hpp"

using namespace ridegfl;

namespace {

DriverTransition transition(double t1, double d1, double idle, double reach, double t2, double d2,
                            double alpha1 = 1.0, double alpha2 = 1.0)
{
    DriverTransition tr;
    tr.first.trip.duration = t1;
    tr.first.trip.distance = d1;
    tr.first.trip.surge_factor = alpha1;
    tr.first.origin_zone = ZoneId("1");
    tr.first.dest_zone = ZoneId("2");
    tr.first.period = PeriodBin::weekday_peak;
    tr.first.dropoff_period = PeriodBin::weekday_midday;
    tr.second.trip.duration = t2;
    tr.second.trip.distance = d2;
    tr.second.trip.surge_factor = alpha2;
    tr.second.origin_zone = ZoneId("3");
    tr.second.dest_zone = ZoneId("4");
    tr.idle_time = idle;
    tr.reach_time = reach;
    return tr;
}

// distance giving a flat fare of `fare` for a trip of `minutes` (fare above the minimum)
double distance_for(double fare, double minutes) { return (fare - 1.5 - 0.25 * minutes) / 0.99; }

} // namespace

TEST_CASE("flat fare examples")
{
    CHECK(flat_fare(0, 0) == doctest::Approx(4.00).epsilon(1e-12));
    CHECK(flat_fare(10, 5) == doctest::Approx(8.95).epsilon(1e-12));
    CHECK(flat_fare(2, 0.5) == doctest::Approx(4.00).epsilon(1e-12));
    CHECK_THROWS_AS(flat_fare(-1, 0), std::domain_error);
    CHECK_THROWS_AS(flat_fare(0, -1), std::domain_error);
}

TEST_CASE("flat fare is monotone and floored")
{
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> t(0, 60), d(0, 30), step(0, 5);
    for (int i = 0; i < 1000; ++i) {
        const double a = t(rng), b = d(rng);
        const double f = flat_fare(a, b);
        CHECK(f >= 4.0);
        CHECK(flat_fare(a + step(rng), b) >= f);
        CHECK(flat_fare(a, b + step(rng)) >= f);
    }
}

TEST_CASE("surge fare")
{
    CHECK(surge_fare(8.95, 1.0) == 8.95);
    CHECK(surge_fare(8.95, 2.0) == doctest::Approx(17.90).epsilon(1e-12));
    CHECK(surge_fare(4.00, 1.5) == doctest::Approx(6.00).epsilon(1e-12));
    CHECK_THROWS_AS(surge_fare(4.0, 0.0), std::domain_error);
    CHECK_THROWS_AS(surge_fare(4.0, -1.0), std::domain_error);
}

TEST_CASE("class normalisation recomputes standard fares")
{
    TripRecord t;
    t.duration = 10;
    t.distance = 5;
    t.vehicle_class = VehicleClass::premium;
    Tariff tariff;
    tariff.class_rates[VehicleClass::premium] = {5.0, 1.0, 3.0, 10.0};
    CHECK(normalize_to_standard(t, tariff) == doctest::Approx(8.95));
    t.vehicle_class = VehicleClass::standard;
    CHECK(normalize_to_standard(t, tariff) == flat_fare(10, 5));
    tariff.class_rates.erase(VehicleClass::suv);
    t.vehicle_class = VehicleClass::suv;
    CHECK_THROWS_AS(normalize_to_standard(t, tariff), Rejection);
}

TEST_CASE("unproductive time")
{
    CHECK(unproductive_time(12, 6) == 18);
    CHECK(unproductive_time(0, 0) == 0);
    CHECK(unproductive_time(12.8, 6.4) == doctest::Approx(19.2));
}

TEST_CASE("continuation payoff examples")
{
    // F* = 10 with t* = 12, u = 18
    auto tr = transition(10, 5, 12, 6, 12, distance_for(10.0, 12));
    const auto s = continuation_payoff(tr, FareMode::flat);
    CHECK(s.value == doctest::Approx(20.0).epsilon(1e-12));
    CHECK(s.anchor_zone == ZoneId("2"));
    CHECK(s.period == PeriodBin::weekday_midday);
    CHECK(s.components.unproductive == doctest::Approx(18.0));

    CHECK(continuation_rate(20.0, 0.0, 60.0) == doctest::Approx(20.0));

    tr.second.trip.surge_factor = 2.0;
    CHECK(continuation_payoff(tr, FareMode::surge).value == doctest::Approx(40.0).epsilon(1e-12));
    CHECK(continuation_payoff(tr, FareMode::flat).value == doctest::Approx(20.0).epsilon(1e-12));

    CHECK_THROWS_AS(continuation_rate(10.0, 0.0, 0.0), Rejection);
}

TEST_CASE("driver productivity and its decomposition")
{
    const auto tr = transition(10, 5, 12, 6, 12, distance_for(10.0, 12));
    const auto s = driver_productivity(tr, FareMode::flat);
    CHECK(s.value == doctest::Approx(28.425).epsilon(1e-12));
    CHECK(s.anchor_zone == ZoneId("2"));
    CHECK(s.period == PeriodBin::weekday_peak);

    const auto d = productivity_decomposition(tr, FareMode::flat);
    CHECK(d.first_weight == doctest::Approx(0.25));
    CHECK(d.first_hourly == doctest::Approx(53.7));
    CHECK(d.continuation_weight == doctest::Approx(0.75));
    CHECK(d.continuation == doctest::Approx(20.0));
    CHECK(d.combined() == doctest::Approx(28.425).epsilon(1e-12));

    // back-to-back identical trips earn each trip's own rate
    const auto same = transition(15, 4, 0, 0, 15, 4);
    CHECK(driver_productivity(same, FareMode::flat).value == doctest::Approx(60.0 * flat_fare(15, 4) / 15.0));

    CHECK_THROWS_AS(decompose_rates(5.0, 0.0, 10.0, 5.0, 10.0), Rejection);
    CHECK_THROWS_AS(two_trip_rate(1.0, 0.0, 0.0, 1.0, 0.0), Rejection);
}

TEST_CASE("decomposition weight moves to the first trip as u + t* vanishes")
{
    const auto d = decompose_rates(8.95, 10.0, 1e-9, 1e-9, 1e-9);
    CHECK(d.first_weight == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(d.combined() == doctest::Approx(53.7).epsilon(1e-6));
}

TEST_CASE("metrics scale with fares and inversely with times")
{
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> f(4, 40), t(1, 60), u(0, 59), c(0.5, 3);
    for (int i = 0; i < 200; ++i) {
        const double f1 = f(rng), t1 = t(rng), uu = u(rng), f2 = f(rng), t2 = t(rng), k = c(rng);
        CHECK(two_trip_rate(k * f1, t1, uu, k * f2, t2) ==
              doctest::Approx(k * two_trip_rate(f1, t1, uu, f2, t2)).epsilon(1e-12));
        CHECK(continuation_rate(f2, k * uu, k * t2) == doctest::Approx(continuation_rate(f2, uu, t2) / k).epsilon(1e-12));
    }
}

TEST_CASE("vehicle class never changes metric values")
{
    auto tr = transition(11, 3, 7, 4, 9, 2.5);
    const double base = driver_productivity(tr, FareMode::flat).value;
    for (auto c : {VehicleClass::premium, VehicleClass::luxury, VehicleClass::suv}) {
        tr.first.trip.vehicle_class = c;
        tr.second.trip.vehicle_class = c;
        CHECK(driver_productivity(tr, FareMode::flat).value == base);
    }
}

TEST_CASE("experiment filter keeps transitions by first origin")
{
    std::vector<DriverTransition> trs;
    std::mt19937_64 rng(1);
    std::bernoulli_distribution cbd(0.3);
    std::size_t planted = 0;
    for (int i = 0; i < 500; ++i) {
        auto tr = transition(10, 2, 5, 5, 10, 2);
        const bool in = cbd(rng);
        planted += in;
        tr.first.origin_zone = ZoneId(in ? "c" + std::to_string(i % 3) : std::to_string(i % 50));
        trs.push_back(tr);
    }
    FilterReport rep;
    const auto kept = experiment_filter(trs, {ZoneId("c0"), ZoneId("c1"), ZoneId("c2")}, &rep);
    CHECK(kept.size() == planted);
    CHECK(rep.input == 500);
    CHECK(rep.retained == planted);
    for (const auto& tr : kept) CHECK(tr.first.origin_zone.str()[0] == 'c');

    std::set<ZoneId> all;
    for (const auto& tr : trs) all.insert(tr.first.origin_zone);
    CHECK(experiment_filter(trs, all).size() == trs.size());
    CHECK_THROWS_AS(experiment_filter(trs, {}), std::invalid_argument);
}
