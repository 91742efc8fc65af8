#include "ridegfl/zones.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <set>

#include <json.hpp>

#include "ridegfl/delimited.hpp"

namespace ridegfl {

using nlohmann::json;

bool point_in_polygon(LonLat p, const ZonePolygon& poly)
{
    bool inside = false;
    for (const auto& ring : poly.rings) {
        const std::size_t n = ring.size();
        for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
            const LonLat& a = ring[i];
            const LonLat& b = ring[j];
            if ((a.lat > p.lat) != (b.lat > p.lat)) {
                const double x = (b.lon - a.lon) * (p.lat - a.lat) / (b.lat - a.lat) + a.lon;
                if (p.lon < x) inside = !inside;
            }
        }
    }
    return inside;
}

LonLat vertex_average(const ZoneGeometry& zone)
{
    double lon = 0.0;
    double lat = 0.0;
    std::size_t n = 0;
    for (const auto& poly : zone.polygons) {
        if (poly.rings.empty()) continue;
        for (const auto& v : poly.rings.front()) {
            lon += v.lon;
            lat += v.lat;
            ++n;
        }
    }
    if (n == 0) return {std::nan(""), std::nan("")};
    return {lon / static_cast<double>(n), lat / static_cast<double>(n)};
}

namespace {

std::size_t distinct_vertices(const std::vector<LonLat>& ring)
{
    std::set<std::pair<double, double>> seen;
    for (const auto& v : ring) seen.emplace(v.lon, v.lat);
    return seen.size();
}

} // namespace

ZoneSet::ZoneSet(std::vector<ZoneGeometry> zones) : zones_(std::move(zones))
{
    std::sort(zones_.begin(), zones_.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    for (std::size_t i = 0; i < zones_.size(); ++i) {
        const auto& z = zones_[i];
        if (z.id.empty()) throw ZoneFileError("zone without an id");
        if (!by_id_.emplace(z.id, i).second) throw ZoneFileError("duplicate zone id: " + z.id.str());
        if (z.polygons.empty()) throw ZoneFileError("zone " + z.id.str() + " has no polygons");
        Box box{INFINITY, INFINITY, -INFINITY, -INFINITY};
        for (const auto& poly : z.polygons) {
            if (poly.rings.empty()) throw ZoneFileError("zone " + z.id.str() + " has an empty polygon");
            for (const auto& ring : poly.rings) {
                if (distinct_vertices(ring) < 3) {
                    throw ZoneFileError("zone " + z.id.str() + " has a degenerate ring (< 3 distinct vertices)");
                }
                for (const auto& v : ring) {
                    if (!std::isfinite(v.lon) || !std::isfinite(v.lat)) {
                        throw ZoneFileError("zone " + z.id.str() + " has a non-finite vertex");
                    }
                    box.min_lon = std::min(box.min_lon, v.lon);
                    box.min_lat = std::min(box.min_lat, v.lat);
                    box.max_lon = std::max(box.max_lon, v.lon);
                    box.max_lat = std::max(box.max_lat, v.lat);
                }
            }
        }
        boxes_.push_back(box);
    }
    if (zones_.empty()) return;

    extent_ = boxes_.front();
    for (const auto& b : boxes_) {
        extent_.min_lon = std::min(extent_.min_lon, b.min_lon);
        extent_.min_lat = std::min(extent_.min_lat, b.min_lat);
        extent_.max_lon = std::max(extent_.max_lon, b.max_lon);
        extent_.max_lat = std::max(extent_.max_lat, b.max_lat);
    }
    grid_ = std::clamp<std::size_t>(static_cast<std::size_t>(2.0 * std::sqrt(static_cast<double>(zones_.size()))), 1, 256);
    cells_.assign(grid_ * grid_, {});
    const double w = std::max(extent_.max_lon - extent_.min_lon, 1e-12);
    const double h = std::max(extent_.max_lat - extent_.min_lat, 1e-12);
    auto cell = [&](double v, double lo, double span) {
        auto c = static_cast<long>(std::floor((v - lo) / span * static_cast<double>(grid_)));
        return static_cast<std::size_t>(std::clamp<long>(c, 0, static_cast<long>(grid_) - 1));
    };
    for (std::size_t i = 0; i < zones_.size(); ++i) {
        const auto& b = boxes_[i];
        const std::size_t c0 = cell(b.min_lon, extent_.min_lon, w);
        const std::size_t c1 = cell(b.max_lon, extent_.min_lon, w);
        const std::size_t r0 = cell(b.min_lat, extent_.min_lat, h);
        const std::size_t r1 = cell(b.max_lat, extent_.min_lat, h);
        for (std::size_t r = r0; r <= r1; ++r) {
            for (std::size_t c = c0; c <= c1; ++c) cells_[r * grid_ + c].push_back(i);
        }
    }
}

std::optional<ZoneId> ZoneSet::assign(LonLat p) const
{
    if (zones_.empty() || !extent_.contains(p)) return std::nullopt;
    const double w = std::max(extent_.max_lon - extent_.min_lon, 1e-12);
    const double h = std::max(extent_.max_lat - extent_.min_lat, 1e-12);
    auto cell = [&](double v, double lo, double span) {
        auto c = static_cast<long>(std::floor((v - lo) / span * static_cast<double>(grid_)));
        return static_cast<std::size_t>(std::clamp<long>(c, 0, static_cast<long>(grid_) - 1));
    };
    const auto& candidates = cells_[cell(p.lat, extent_.min_lat, h) * grid_ + cell(p.lon, extent_.min_lon, w)];
    for (std::size_t i : candidates) {
        if (!boxes_[i].contains(p)) continue;
        for (const auto& poly : zones_[i].polygons) {
            if (point_in_polygon(p, poly)) return zones_[i].id;
        }
    }
    return std::nullopt;
}

const ZoneGeometry* ZoneSet::find(const ZoneId& id) const
{
    auto it = by_id_.find(id);
    return it == by_id_.end() ? nullptr : &zones_[it->second];
}

namespace {

std::vector<LonLat> read_ring(const json& coords)
{
    std::vector<LonLat> ring;
    for (const auto& pt : coords) {
        if (!pt.is_array() || pt.size() < 2) throw ZoneFileError("malformed coordinate");
        ring.push_back({pt[0].get<double>(), pt[1].get<double>()});
    }
    if (ring.size() > 1 && ring.front().lon == ring.back().lon && ring.front().lat == ring.back().lat) {
        ring.pop_back();
    }
    return ring;
}

ZonePolygon read_polygon(const json& coords)
{
    ZonePolygon poly;
    for (const auto& r : coords) poly.rings.push_back(read_ring(r));
    return poly;
}

std::string id_text(const json& v)
{
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_integer()) return std::to_string(v.get<long long>());
    if (v.is_number_unsigned()) return std::to_string(v.get<unsigned long long>());
    if (v.is_number_float()) {
        const double d = v.get<double>();
        if (std::floor(d) == d) return std::to_string(static_cast<long long>(d));
        return v.dump();
    }
    throw ZoneFileError("zone id must be a string or number");
}

} // namespace

ZoneSet load_zones_geojson(std::istream& in, std::string_view id_property)
{
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw ZoneFileError(std::string("zone file is not valid JSON: ") + e.what());
    }
    if (!doc.is_object() || doc.value("type", "") != "FeatureCollection" || !doc.contains("features")) {
        throw ZoneFileError("zone file must be a GeoJSON FeatureCollection");
    }
    std::vector<ZoneGeometry> zones;
    try {
        for (const auto& f : doc.at("features")) {
            const auto& props = f.at("properties");
            if (!props.contains(id_property)) {
                throw ZoneFileError("feature without '" + std::string(id_property) + "' property");
            }
            ZoneGeometry z;
            z.id = ZoneId(id_text(props.at(std::string(id_property))));
            const auto& geom = f.at("geometry");
            const std::string type = geom.at("type").get<std::string>();
            if (type == "Polygon") {
                z.polygons.push_back(read_polygon(geom.at("coordinates")));
            } else if (type == "MultiPolygon") {
                for (const auto& p : geom.at("coordinates")) z.polygons.push_back(read_polygon(p));
            } else {
                throw ZoneFileError("unsupported geometry type for zone " + z.id.str() + ": " + type);
            }
            zones.push_back(std::move(z));
        }
    } catch (const json::exception& e) {
        throw ZoneFileError(std::string("malformed zone feature: ") + e.what());
    }
    return ZoneSet(std::move(zones));
}

ZoneAssignments load_zone_assignments(std::istream& in, char delim)
{
    std::vector<std::string> header;
    if (!read_record(in, delim, header)) throw ConfigError("zone assignment file is empty");
    auto col = [&](std::string_view name) {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (trim(header[i]) == name) return i;
        }
        throw ConfigError("zone assignment file lacks column " + std::string(name));
    };
    const std::size_t ti = col("trip_id");
    const std::size_t oi = col("origin_zone");
    const std::size_t di = col("dest_zone");
    ZoneAssignments out;
    std::vector<std::string> row;
    while (read_record(in, delim, row)) {
        if (row.size() <= std::max({ti, oi, di})) continue;
        out.by_trip[std::string(trim(row[ti]))] = {ZoneId(std::string(trim(row[oi]))), ZoneId(std::string(trim(row[di])))};
    }
    return out;
}

ZoningResult zone_trips(std::vector<TripRecord> trips, const ZoneSet* polygons, const ZoneAssignments* assignments,
                        const PeriodCalendar& calendar)
{
    if (!polygons && !assignments) throw ConfigError("zone assignment needs polygons or an assignment file");
    ZoningResult out;
    out.trips.reserve(trips.size());
    for (auto& t : trips) {
        ZoneId origin;
        ZoneId dest;
        const ZoneAssignments::Entry* assigned = nullptr;
        if (assignments) {
            if (auto it = assignments->by_trip.find(t.trip_id); it != assignments->by_trip.end()) assigned = &it->second;
        }
        if (assigned) {
            origin = assigned->origin;
            dest = assigned->dest;
        } else if (polygons) {
            if (auto z = polygons->assign(t.pickup_point)) origin = *z;
            if (auto z = polygons->assign(t.dropoff_point)) dest = *z;
        }
        if (origin.empty()) {
            ++out.rejected["no-origin-zone"];
            continue;
        }
        if (dest.empty()) {
            ++out.rejected["no-dest-zone"];
            continue;
        }
        ZonedTrip zt;
        zt.period = bin_period(t.pickup_ts, calendar);
        zt.dropoff_period = bin_period(t.dropoff_ts, calendar);
        zt.trip = std::move(t);
        zt.origin_zone = std::move(origin);
        zt.dest_zone = std::move(dest);
        out.trips.push_back(std::move(zt));
    }
    return out;
}

} // namespace ridegfl
