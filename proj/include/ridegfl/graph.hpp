#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "ridegfl/types.hpp"

namespace ridegfl {

class ZoneSet;

/// Undirected edge between node indices, stored with a < b.
struct Edge {
    std::size_t a = 0;
    std::size_t b = 0;
    friend bool operator==(const Edge&, const Edge&) = default;
    friend auto operator<=>(const Edge&, const Edge&) = default;
};

/// Simple undirected graph over zones. Nodes are kept in zone-id order, so
/// construction does not depend on the order nodes were supplied in.
class ZoneGraph {
public:
    ZoneGraph() = default;

    /// Throws std::invalid_argument on duplicate nodes, self-loops or edges
    /// naming unknown zones. Duplicate edges are merged.
    ZoneGraph(std::vector<std::pair<ZoneId, LonLat>> nodes, const std::vector<std::pair<ZoneId, ZoneId>>& edges);

    std::size_t node_count() const noexcept { return nodes_.size(); }
    std::size_t edge_count() const noexcept { return edges_.size(); }
    const std::vector<ZoneId>& nodes() const noexcept { return nodes_; }
    const ZoneId& node(std::size_t i) const { return nodes_.at(i); }
    LonLat centroid(std::size_t i) const { return centroids_.at(i); }
    const std::vector<Edge>& edges() const noexcept { return edges_; }
    std::span<const std::size_t> neighbors(std::size_t i) const { return adjacency_.at(i); }
    std::size_t degree(std::size_t i) const { return adjacency_.at(i).size(); }
    std::optional<std::size_t> index_of(const ZoneId& id) const;

    /// Number of k-NN boundary ties resolved by zone-id order (0 when the
    /// graph was not built by knn_graph).
    std::size_t knn_ties = 0;

private:
    std::vector<ZoneId> nodes_;
    std::vector<LonLat> centroids_;
    std::vector<Edge> edges_;
    std::vector<std::vector<std::size_t>> adjacency_;
    std::unordered_map<ZoneId, std::size_t> index_;
};

/// Connected-component label per node, labels numbered in order of the
/// smallest node index they contain.
std::vector<std::size_t> connected_components(const ZoneGraph& g, std::size_t* count = nullptr);

struct CentroidResult {
    std::map<ZoneId, LonLat> centroids;
    std::vector<ZoneId> excluded; // neither observations nor geometry
};

/// Mean of the observed points per zone. Zones listed in `extra_zones` with
/// no observations fall back to the polygon vertex average when `polygons`
/// has them; otherwise they are excluded.
CentroidResult zone_centroids(std::span<const std::pair<ZoneId, LonLat>> observations, const ZoneSet* polygons,
                              std::span<const ZoneId> extra_zones = {});

enum class DistanceMode { degrees, projected };

/// Union-symmetrised k-nearest-neighbour graph over centroids. Distance ties
/// are broken by zone-id order.
ZoneGraph knn_graph(const std::map<ZoneId, LonLat>& centroids, std::size_t k = 4,
                    DistanceMode mode = DistanceMode::degrees);

/// Edge-disjoint trails covering the graph; each trail is its vertex sequence.
struct TrailDecomposition {
    std::vector<std::vector<std::size_t>> trails;
    std::vector<std::size_t> trail_component;          // component label per trail
    std::vector<std::size_t> pseudoedges_per_component; // indexed by component label
};

TrailDecomposition decompose_trails(const ZoneGraph& g);

/// Checks coverage and contiguity; returns an empty string when valid.
std::string validate_decomposition(const ZoneGraph& g, const TrailDecomposition& d);

void write_edge_list(std::ostream& out, const ZoneGraph& g);
/// Reads `zone_a,zone_b` lines (a header row and '#' comments are skipped).
ZoneGraph read_edge_list(std::istream& in, char delim = ',');
void write_trails(std::ostream& out, const ZoneGraph& g, const TrailDecomposition& d);

} // namespace ridegfl
