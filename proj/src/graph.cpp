#include "ridegfl/graph.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <set>
#include <stdexcept>

#include "ridegfl/delimited.hpp"
#include "ridegfl/zones.hpp"

namespace ridegfl {

ZoneGraph::ZoneGraph(std::vector<std::pair<ZoneId, LonLat>> nodes, const std::vector<std::pair<ZoneId, ZoneId>>& edges)
{
    std::sort(nodes.begin(), nodes.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (!index_.emplace(nodes[i].first, i).second) {
            throw std::invalid_argument("duplicate graph node: " + nodes[i].first.str());
        }
        nodes_.push_back(nodes[i].first);
        centroids_.push_back(nodes[i].second);
    }
    std::set<Edge> unique;
    for (const auto& [za, zb] : edges) {
        auto ia = index_of(za);
        auto ib = index_of(zb);
        if (!ia || !ib) throw std::invalid_argument("edge references unknown zone: " + za.str() + "-" + zb.str());
        if (*ia == *ib) throw std::invalid_argument("self-loop on zone " + za.str());
        unique.insert(Edge{std::min(*ia, *ib), std::max(*ia, *ib)});
    }
    edges_.assign(unique.begin(), unique.end());
    adjacency_.assign(nodes_.size(), {});
    for (const auto& e : edges_) {
        adjacency_[e.a].push_back(e.b);
        adjacency_[e.b].push_back(e.a);
    }
    for (auto& adj : adjacency_) std::sort(adj.begin(), adj.end());
}

std::optional<std::size_t> ZoneGraph::index_of(const ZoneId& id) const
{
    auto it = index_.find(id);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

std::vector<std::size_t> connected_components(const ZoneGraph& g, std::size_t* count)
{
    constexpr auto unset = static_cast<std::size_t>(-1);
    std::vector<std::size_t> label(g.node_count(), unset);
    std::size_t next = 0;
    std::vector<std::size_t> stack;
    for (std::size_t s = 0; s < g.node_count(); ++s) {
        if (label[s] != unset) continue;
        label[s] = next;
        stack.push_back(s);
        while (!stack.empty()) {
            const std::size_t v = stack.back();
            stack.pop_back();
            for (std::size_t w : g.neighbors(v)) {
                if (label[w] == unset) {
                    label[w] = next;
                    stack.push_back(w);
                }
            }
        }
        ++next;
    }
    if (count) *count = next;
    return label;
}

CentroidResult zone_centroids(std::span<const std::pair<ZoneId, LonLat>> observations, const ZoneSet* polygons,
                              std::span<const ZoneId> extra_zones)
{
    struct Acc {
        double lon = 0.0, lat = 0.0;
        std::size_t n = 0;
    };
    std::map<ZoneId, Acc> acc;
    for (const auto& [zone, p] : observations) {
        if (!std::isfinite(p.lon) || !std::isfinite(p.lat)) continue;
        auto& a = acc[zone];
        a.lon += p.lon;
        a.lat += p.lat;
        ++a.n;
    }
    CentroidResult out;
    for (const auto& [zone, a] : acc) {
        out.centroids[zone] = {a.lon / static_cast<double>(a.n), a.lat / static_cast<double>(a.n)};
    }
    for (const auto& zone : extra_zones) {
        if (out.centroids.contains(zone)) continue;
        const ZoneGeometry* geom = polygons ? polygons->find(zone) : nullptr;
        if (geom) {
            out.centroids[zone] = vertex_average(*geom);
        } else if (std::find(out.excluded.begin(), out.excluded.end(), zone) == out.excluded.end()) {
            out.excluded.push_back(zone);
        }
    }
    std::sort(out.excluded.begin(), out.excluded.end());
    return out;
}

ZoneGraph knn_graph(const std::map<ZoneId, LonLat>& centroids, std::size_t k, DistanceMode mode)
{
    if (centroids.size() < 2) throw std::invalid_argument("k-NN graph needs at least two zones");
    if (k < 1) throw std::invalid_argument("k must be at least 1");

    std::vector<std::pair<ZoneId, LonLat>> nodes(centroids.begin(), centroids.end());
    const std::size_t n = nodes.size();

    double lon_scale = 1.0;
    double lat_scale = 1.0;
    if (mode == DistanceMode::projected) {
        double mean_lat = 0.0;
        for (const auto& [_, p] : nodes) mean_lat += p.lat;
        mean_lat /= static_cast<double>(n);
        constexpr double km_per_degree = 111.32;
        lon_scale = km_per_degree * std::cos(mean_lat * M_PI / 180.0);
        lat_scale = km_per_degree;
    }
    auto dist2 = [&](std::size_t i, std::size_t j) {
        const double dx = (nodes[i].second.lon - nodes[j].second.lon) * lon_scale;
        const double dy = (nodes[i].second.lat - nodes[j].second.lat) * lat_scale;
        return dx * dx + dy * dy;
    };

    const std::size_t take = std::min(k, n - 1);
    std::vector<std::pair<ZoneId, ZoneId>> edges;
    std::size_t ties = 0;
    std::vector<std::pair<double, std::size_t>> cand;
    for (std::size_t i = 0; i < n; ++i) {
        cand.clear();
        for (std::size_t j = 0; j < n; ++j) {
            if (j != i) cand.emplace_back(dist2(i, j), j);
        }
        // nodes are in zone-id order, so comparing indices breaks ties by zone id
        std::sort(cand.begin(), cand.end());
        if (take < cand.size() && cand[take - 1].first == cand[take].first) ++ties;
        for (std::size_t t = 0; t < take; ++t) edges.emplace_back(nodes[i].first, nodes[cand[t].second].first);
    }
    ZoneGraph g(std::move(nodes), edges);
    g.knn_ties = ties;
    return g;
}

TrailDecomposition decompose_trails(const ZoneGraph& g)
{
    std::size_t ncomp = 0;
    const auto comp = connected_components(g, &ncomp);

    // Multigraph: original edges first, then one pseudoedge per odd-vertex pair.
    struct MEdge {
        std::size_t u, v;
        bool pseudo;
    };
    std::vector<MEdge> medges;
    medges.reserve(g.edge_count() + g.node_count() / 2);
    for (const auto& e : g.edges()) medges.push_back({e.a, e.b, false});

    TrailDecomposition out;
    out.pseudoedges_per_component.assign(ncomp, 0);
    std::vector<std::vector<std::size_t>> odd(ncomp);
    for (std::size_t v = 0; v < g.node_count(); ++v) {
        if (g.degree(v) % 2 == 1) odd[comp[v]].push_back(v); // ascending, i.e. zone-id order
    }
    for (std::size_t c = 0; c < ncomp; ++c) {
        for (std::size_t i = 0; i + 1 < odd[c].size(); i += 2) {
            medges.push_back({odd[c][i], odd[c][i + 1], true});
            ++out.pseudoedges_per_component[c];
        }
    }

    std::vector<std::vector<std::size_t>> incident(g.node_count());
    for (std::size_t e = 0; e < medges.size(); ++e) {
        incident[medges[e].u].push_back(e);
        incident[medges[e].v].push_back(e);
    }

    std::vector<bool> used(medges.size(), false);
    std::vector<std::size_t> cursor(g.node_count(), 0);
    std::vector<bool> component_done(ncomp, false);

    for (std::size_t start = 0; start < g.node_count(); ++start) {
        const std::size_t c = comp[start];
        if (component_done[c]) continue;
        component_done[c] = true;
        if (g.degree(start) == 0) continue; // isolated node: no trails

        // Iterative Hierholzer; the circuit is produced as a sequence of edge ids.
        std::vector<std::pair<std::size_t, std::size_t>> stack{{start, SIZE_MAX}}; // (vertex, edge used to reach it)
        std::vector<std::pair<std::size_t, std::size_t>> circuit;                  // reversed
        while (!stack.empty()) {
            const std::size_t v = stack.back().first;
            auto& cur = cursor[v];
            while (cur < incident[v].size() && used[incident[v][cur]]) ++cur;
            if (cur == incident[v].size()) {
                circuit.push_back(stack.back());
                stack.pop_back();
            } else {
                const std::size_t e = incident[v][cur];
                used[e] = true;
                const std::size_t w = medges[e].u == v ? medges[e].v : medges[e].u;
                stack.emplace_back(w, e);
            }
        }
        std::reverse(circuit.begin(), circuit.end());
        // circuit[0] is (start, none); circuit[i].second is the edge from circuit[i-1] to circuit[i]
        const std::size_t m = circuit.size() - 1; // number of edges in the circuit

        if (out.pseudoedges_per_component[c] == 0) {
            std::vector<std::size_t> trail;
            for (const auto& [v, _] : circuit) trail.push_back(v);
            out.trails.push_back(std::move(trail));
            out.trail_component.push_back(c);
            continue;
        }

        // Rotate so the walk starts right after a pseudoedge, then cut at each pseudoedge.
        std::size_t first_pseudo = 0;
        for (std::size_t i = 1; i <= m; ++i) {
            if (medges[circuit[i].second].pseudo) {
                first_pseudo = i;
                break;
            }
        }
        std::vector<std::size_t> trail{circuit[first_pseudo].first};
        for (std::size_t step = 1; step <= m; ++step) {
            std::size_t i = first_pseudo + step;
            if (i > m) i -= m;
            const auto& [v, e] = circuit[i];
            if (medges[e].pseudo) {
                if (trail.size() > 1) {
                    out.trails.push_back(std::move(trail));
                    out.trail_component.push_back(c);
                }
                trail = {v};
            } else {
                trail.push_back(v);
            }
        }
        if (trail.size() > 1) {
            out.trails.push_back(std::move(trail));
            out.trail_component.push_back(c);
        }
    }
    return out;
}

std::string validate_decomposition(const ZoneGraph& g, const TrailDecomposition& d)
{
    std::map<Edge, std::size_t> seen;
    for (std::size_t t = 0; t < d.trails.size(); ++t) {
        const auto& trail = d.trails[t];
        if (trail.size() < 2) return "trail " + std::to_string(t) + " has no edges";
        for (std::size_t i = 1; i < trail.size(); ++i) {
            const Edge e{std::min(trail[i - 1], trail[i]), std::max(trail[i - 1], trail[i])};
            ++seen[e];
        }
    }
    for (const auto& e : g.edges()) {
        auto it = seen.find(e);
        if (it == seen.end()) return "edge " + g.node(e.a).str() + "-" + g.node(e.b).str() + " not covered";
        if (it->second != 1) return "edge " + g.node(e.a).str() + "-" + g.node(e.b).str() + " covered more than once";
    }
    if (seen.size() != g.edge_count()) return "trails use edges that are not in the graph";
    return {};
}

void write_edge_list(std::ostream& out, const ZoneGraph& g)
{
    out << "# ties broken by zone-id order: " << g.knn_ties << '\n';
    out << "zone_a,zone_b\n";
    for (const auto& e : g.edges()) {
        out << quote_field(g.node(e.a).str(), ',') << ',' << quote_field(g.node(e.b).str(), ',') << '\n';
    }
}

ZoneGraph read_edge_list(std::istream& in, char delim)
{
    std::vector<std::pair<ZoneId, ZoneId>> edges;
    std::set<ZoneId> nodes;
    std::vector<std::string> row;
    bool first = true;
    while (read_record(in, delim, row)) {
        if (!row.empty() && trim(row[0]).starts_with('#')) continue;
        if (row.size() < 2) throw std::invalid_argument("edge list rows need two zone ids");
        ZoneId a(std::string(trim(row[0])));
        ZoneId b(std::string(trim(row[1])));
        if (first) {
            first = false;
            if (a.str() == "zone_a" || a.str() == "source" || a.str() == "from") continue;
        }
        nodes.insert(a);
        nodes.insert(b);
        edges.emplace_back(std::move(a), std::move(b));
    }
    std::vector<std::pair<ZoneId, LonLat>> nv;
    for (const auto& z : nodes) nv.emplace_back(z, LonLat{std::nan(""), std::nan("")});
    return ZoneGraph(std::move(nv), edges);
}

void write_trails(std::ostream& out, const ZoneGraph& g, const TrailDecomposition& d)
{
    out << "trail,zones\n";
    for (std::size_t t = 0; t < d.trails.size(); ++t) {
        out << t << ',';
        for (std::size_t i = 0; i < d.trails[t].size(); ++i) {
            if (i) out << ' ';
            out << g.node(d.trails[t][i]).str();
        }
        out << '\n';
    }
}

} // namespace ridegfl
