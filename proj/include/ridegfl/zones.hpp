#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ridegfl/trips.hpp"
#include "ridegfl/types.hpp"

namespace ridegfl {

/// rings[0] is the outer boundary, the rest are holes. Rings are stored
/// without the repeated closing vertex.
struct ZonePolygon {
    std::vector<std::vector<LonLat>> rings;
};

struct ZoneGeometry {
    ZoneId id;
    std::vector<ZonePolygon> polygons;
};

/// Even-odd (crossing number) test over all rings of the polygon.
bool point_in_polygon(LonLat p, const ZonePolygon& poly);

/// Average of the outer-ring vertices of every polygon.
LonLat vertex_average(const ZoneGeometry& zone);

/// Immutable set of zone polygons with a uniform-grid lookup index.
class ZoneSet {
public:
    ZoneSet() = default;
    /// Throws ZoneFileError on duplicate ids or rings with fewer than three
    /// distinct vertices.
    explicit ZoneSet(std::vector<ZoneGeometry> zones);

    /// Zone containing `p`; when polygons overlap the smallest zone id wins.
    std::optional<ZoneId> assign(LonLat p) const;

    const std::vector<ZoneGeometry>& zones() const noexcept { return zones_; }
    const ZoneGeometry* find(const ZoneId& id) const;
    bool empty() const noexcept { return zones_.empty(); }

private:
    struct Box {
        double min_lon, min_lat, max_lon, max_lat;
        bool contains(LonLat p) const
        {
            return p.lon >= min_lon && p.lon <= max_lon && p.lat >= min_lat && p.lat <= max_lat;
        }
    };

    std::vector<ZoneGeometry> zones_; // sorted by id
    std::vector<Box> boxes_;
    Box extent_{0, 0, 0, 0};
    std::size_t grid_ = 1;
    std::vector<std::vector<std::size_t>> cells_;
    std::unordered_map<ZoneId, std::size_t> by_id_;
};

inline std::optional<ZoneId> assign_zone(LonLat p, const ZoneSet& zones)
{
    return zones.assign(p);
}

/// Reads a GeoJSON FeatureCollection of Polygon/MultiPolygon features; the
/// zone id is taken from `properties[id_property]` (string or integer).
ZoneSet load_zones_geojson(std::istream& in, std::string_view id_property = "zone_id");

/// Precomputed trip -> (origin zone, destination zone) assignments.
struct ZoneAssignments {
    struct Entry {
        ZoneId origin;
        ZoneId dest;
    };
    std::unordered_map<std::string, Entry> by_trip;
};

/// Header-bearing delimited text with columns trip_id, origin_zone, dest_zone.
ZoneAssignments load_zone_assignments(std::istream& in, char delim = ',');

struct ZoningResult {
    std::vector<ZonedTrip> trips;
    Tally rejected; // "no-origin-zone", "no-dest-zone"
};

/// Attaches zones and period bins. Exactly one of `polygons` and
/// `assignments` is used; assignments take precedence when both are given.
ZoningResult zone_trips(std::vector<TripRecord> trips, const ZoneSet* polygons, const ZoneAssignments* assignments,
                        const PeriodCalendar& calendar);

} // namespace ridegfl
