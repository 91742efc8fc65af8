#include "ridegfl/types.hpp"

#include <algorithm>
#include <cctype>

namespace ridegfl {

namespace {

bool all_digits(const std::string& s)
{
    return !s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); });
}

} // namespace

std::strong_ordering operator<=>(const ZoneId& a, const ZoneId& b) noexcept
{
    const auto& x = a.value_;
    const auto& y = b.value_;
    const bool xd = all_digits(x);
    const bool yd = all_digits(y);
    if (xd != yd) return xd ? std::strong_ordering::less : std::strong_ordering::greater;
    if (xd) {
        const auto xs = x.find_first_not_of('0');
        const auto ys = y.find_first_not_of('0');
        const std::string_view xv = xs == std::string::npos ? std::string_view{} : std::string_view(x).substr(xs);
        const std::string_view yv = ys == std::string::npos ? std::string_view{} : std::string_view(y).substr(ys);
        if (xv.size() != yv.size()) return xv.size() <=> yv.size();
        if (auto c = xv.compare(yv); c != 0) return c <=> 0;
        // "007" vs "7": fall through to raw comparison to keep a total order
    }
    return x.compare(y) <=> 0;
}

std::string_view to_string(PeriodBin p)
{
    switch (p) {
    case PeriodBin::weekday_peak: return "weekday_peak";
    case PeriodBin::weekday_midday: return "weekday_midday";
    case PeriodBin::weekday_overnight: return "weekday_overnight";
    case PeriodBin::weekend: return "weekend";
    case PeriodBin::other_weekday: return "other_weekday";
    }
    return "?";
}

PeriodBin period_from_string(std::string_view s)
{
    for (auto p : {PeriodBin::weekday_peak, PeriodBin::weekday_midday, PeriodBin::weekday_overnight,
                   PeriodBin::weekend, PeriodBin::other_weekday}) {
        if (to_string(p) == s) return p;
    }
    throw ConfigError("unknown period: " + std::string(s));
}

std::string_view to_string(VehicleClass c)
{
    switch (c) {
    case VehicleClass::standard: return "standard";
    case VehicleClass::premium: return "premium";
    case VehicleClass::luxury: return "luxury";
    case VehicleClass::suv: return "suv";
    }
    return "?";
}

std::string_view to_string(FareMode m)
{
    return m == FareMode::flat ? "flat" : "surge";
}

FareMode fare_mode_from_string(std::string_view s)
{
    if (s == "flat") return FareMode::flat;
    if (s == "surge") return FareMode::surge;
    throw ConfigError("unknown fare mode: " + std::string(s));
}

} // namespace ridegfl
