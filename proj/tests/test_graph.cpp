#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>
#include <sstream>

#include "ridegfl/graph.hpp"
#include "ridegfl/zones.hpp"
#include "support/synthetic.hpp"

using namespace ridegfl;

namespace {

bool has_edge(const ZoneGraph& g, const std::string& a, const std::string& b)
{
    const auto i = g.index_of(ZoneId(a)), j = g.index_of(ZoneId(b));
    if (!i || !j) return false;
    const auto nb = g.neighbors(*i);
    return std::find(nb.begin(), nb.end(), *j) != nb.end();
}

std::size_t odd_vertices(const ZoneGraph& g, const std::vector<std::size_t>& comp, std::size_t c)
{
    std::size_t odd = 0;
    for (std::size_t i = 0; i < g.node_count(); ++i) odd += comp[i] == c && g.degree(i) % 2 == 1;
    return odd;
}

std::vector<std::vector<std::string>> named(const ZoneGraph& g, const TrailDecomposition& d)
{
    std::vector<std::vector<std::string>> out;
    for (const auto& t : d.trails) {
        out.emplace_back();
        for (auto v : t) out.back().push_back(g.node(v).str());
    }
    return out;
}

ZoneGraph graph_of(std::vector<std::string> nodes, std::vector<std::pair<std::string, std::string>> edges)
{
    std::vector<std::pair<ZoneId, LonLat>> n;
    for (auto& s : nodes) n.emplace_back(ZoneId(s), LonLat{});
    std::vector<std::pair<ZoneId, ZoneId>> e;
    for (auto& [a, b] : edges) e.emplace_back(ZoneId(a), ZoneId(b));
    return ZoneGraph(n, e);
}

} // namespace

TEST_CASE("zone centroids")
{
    std::vector<std::pair<ZoneId, LonLat>> obs{{ZoneId("a"), {0, 0}}, {ZoneId("a"), {2, 2}}, {ZoneId("b"), {5, 7}}};
    synth::Grid grid{1, 1, 0.0, 0.0, 1.0};
    std::istringstream in(grid.geojson());
    const auto zones = load_zones_geojson(in);
    const std::vector<ZoneId> extra{ZoneId("0"), ZoneId("ghost")};
    const auto r = zone_centroids(obs, &zones, extra);
    CHECK(r.centroids.at(ZoneId("a")).lon == doctest::Approx(1.0));
    CHECK(r.centroids.at(ZoneId("a")).lat == doctest::Approx(1.0));
    CHECK(r.centroids.at(ZoneId("b")).lon == doctest::Approx(5.0));
    CHECK(r.centroids.at(ZoneId("0")).lon == doctest::Approx(0.5));
    CHECK(r.centroids.at(ZoneId("0")).lat == doctest::Approx(0.5));
    REQUIRE(r.excluded.size() == 1);
    CHECK(r.excluded[0] == ZoneId("ghost"));
}

TEST_CASE("k-NN small cases")
{
    auto g = knn_graph({{ZoneId("1"), {0, 0}}, {ZoneId("2"), {1, 0}}}, 1);
    CHECK(g.edge_count() == 1);

    g = knn_graph({{ZoneId("1"), {0, 0}}, {ZoneId("2"), {1, 0}}, {ZoneId("3"), {2, 0}}}, 1);
    CHECK(g.edge_count() == 2);
    CHECK(has_edge(g, "1", "2"));
    CHECK(has_edge(g, "2", "3"));
    CHECK_FALSE(has_edge(g, "1", "3"));

    CHECK_THROWS_AS(knn_graph({{ZoneId("1"), {0, 0}}}, 1), std::invalid_argument);
}

TEST_CASE("k-NN on a 5x5 grid links interior nodes to their axis neighbours only")
{
    std::map<ZoneId, LonLat> c;
    for (int r = 0; r < 5; ++r) {
        for (int k = 0; k < 5; ++k) c[ZoneId(std::to_string(r * 5 + k))] = {double(k), double(r)};
    }
    const auto g = knn_graph(c, 4);
    auto interior = [](int r, int k) { return r > 0 && r < 4 && k > 0 && k < 4; };
    for (int r = 0; r < 5; ++r) {
        for (int k = 0; k < 5; ++k) {
            if (!interior(r, k)) continue;
            const auto id = std::to_string(r * 5 + k);
            CHECK(has_edge(g, id, std::to_string((r - 1) * 5 + k)));
            CHECK(has_edge(g, id, std::to_string((r + 1) * 5 + k)));
            CHECK(has_edge(g, id, std::to_string(r * 5 + k - 1)));
            CHECK(has_edge(g, id, std::to_string(r * 5 + k + 1)));
        }
    }
    // between interior nodes only axis edges exist
    for (const auto& e : g.edges()) {
        const int a = std::stoi(g.node(e.a).str()), b = std::stoi(g.node(e.b).str());
        if (interior(a / 5, a % 5) && interior(b / 5, b % 5)) {
            CHECK(std::abs(a / 5 - b / 5) + std::abs(a % 5 - b % 5) == 1);
        }
    }
    // boundary nodes choose between equidistant diagonals
    CHECK(g.knn_ties > 0);
}

TEST_CASE("k-NN with k >= n - 1 is complete and input order does not matter")
{
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0, 1);
    std::map<ZoneId, LonLat> c;
    for (int i = 0; i < 9; ++i) c[ZoneId("z" + std::to_string(i))] = {u(rng), u(rng)};
    CHECK(knn_graph(c, 8).edge_count() == 36);

    const auto g = knn_graph(c, 3);
    std::vector<std::pair<ZoneId, LonLat>> nodes(c.begin(), c.end());
    std::shuffle(nodes.begin(), nodes.end(), rng);
    std::vector<std::pair<ZoneId, ZoneId>> edges;
    for (const auto& e : g.edges()) edges.emplace_back(g.node(e.b), g.node(e.a));
    std::shuffle(edges.begin(), edges.end(), rng);
    const ZoneGraph h(nodes, edges);
    CHECK(h.nodes() == g.nodes());
    CHECK(h.edges() == g.edges());
}

TEST_CASE("projected distances use a longitude scale")
{
    // 1 degree of longitude at 60N is about half a degree of latitude
    std::map<ZoneId, LonLat> c{{ZoneId("o"), {0, 60}},   {ZoneId("e"), {1.5, 60}},   {ZoneId("e2"), {1.6, 60}},
                               {ZoneId("n"), {0, 61}},   {ZoneId("n2"), {0, 61.1}}};
    const auto deg = knn_graph(c, 1, DistanceMode::degrees);
    const auto proj = knn_graph(c, 1, DistanceMode::projected);
    CHECK(has_edge(deg, "o", "n"));
    CHECK_FALSE(has_edge(deg, "o", "e"));
    CHECK(has_edge(proj, "o", "e"));
    CHECK_FALSE(has_edge(proj, "o", "n"));
}

TEST_CASE("graph construction rejects malformed input")
{
    CHECK_THROWS_AS(graph_of({"a", "a"}, {}), std::invalid_argument);
    CHECK_THROWS_AS(graph_of({"a", "b"}, {{"a", "a"}}), std::invalid_argument);
    CHECK_THROWS_AS(graph_of({"a", "b"}, {{"a", "c"}}), std::invalid_argument);
    CHECK(graph_of({"a", "b"}, {{"a", "b"}, {"b", "a"}}).edge_count() == 1);
}

TEST_CASE("trail decomposition fixtures")
{
    SUBCASE("path is one trail")
    {
        const auto g = graph_of({"A", "B", "C"}, {{"A", "B"}, {"B", "C"}});
        const auto d = decompose_trails(g);
        CHECK(validate_decomposition(g, d).empty());
        const auto t = named(g, d);
        REQUIRE(t.size() == 1);
        const bool fwd = t[0] == std::vector<std::string>{"A", "B", "C"};
        const bool bwd = t[0] == std::vector<std::string>{"C", "B", "A"};
        CHECK((fwd || bwd));
    }
    SUBCASE("4-cycle is one closed trail")
    {
        const auto g = graph_of({"1", "2", "3", "4"}, {{"1", "2"}, {"2", "3"}, {"3", "4"}, {"4", "1"}});
        const auto d = decompose_trails(g);
        CHECK(validate_decomposition(g, d).empty());
        REQUIRE(d.trails.size() == 1);
        CHECK(d.trails[0].size() == 5);
        CHECK(d.trails[0].front() == d.trails[0].back());
        CHECK(d.pseudoedges_per_component[0] == 0);
    }
    SUBCASE("star with three leaves gives two trails")
    {
        const auto g = graph_of({"X", "a", "b", "c"}, {{"X", "a"}, {"X", "b"}, {"X", "c"}});
        const auto d = decompose_trails(g);
        CHECK(validate_decomposition(g, d).empty());
        CHECK(d.trails.size() == 2);
        CHECK(d.pseudoedges_per_component[0] == 2);
        std::size_t edges = 0;
        for (const auto& t : d.trails) edges += t.size() - 1;
        CHECK(edges == 3);
    }
    SUBCASE("isolated node has no trail")
    {
        const auto g = graph_of({"a", "b", "lonely"}, {{"a", "b"}});
        const auto d = decompose_trails(g);
        CHECK(d.trails.size() == 1);
        CHECK(validate_decomposition(g, d).empty());
    }
}

TEST_CASE("trail decomposition on random graphs")
{
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<std::size_t> size(2, 40);
    std::uniform_real_distribution<double> dens(0.02, 0.5);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = size(rng);
        const auto edges = synth::random_graph(rng, n, dens(rng));
        const auto g = synth::make_graph(n, edges);
        const auto d = decompose_trails(g);
        CHECK(validate_decomposition(g, d).empty());

        std::multiset<std::pair<std::size_t, std::size_t>> seen;
        for (const auto& t : d.trails) {
            for (std::size_t k = 0; k + 1 < t.size(); ++k) {
                seen.emplace(std::min(t[k], t[k + 1]), std::max(t[k], t[k + 1]));
            }
        }
        std::multiset<std::pair<std::size_t, std::size_t>> expect;
        for (const auto& e : g.edges()) expect.emplace(e.a, e.b);
        CHECK(seen == expect);

        std::size_t ncomp = 0;
        const auto comp = connected_components(g, &ncomp);
        std::vector<std::size_t> per(ncomp, 0), size_of(ncomp, 0);
        for (auto c : d.trail_component) ++per[c];
        for (auto c : comp) ++size_of[c];
        for (std::size_t c = 0; c < ncomp; ++c) {
            if (size_of[c] == 1) {
                CHECK(per[c] == 0);
            } else {
                CHECK(per[c] == std::max<std::size_t>(1, odd_vertices(g, comp, c) / 2));
            }
        }
    }
}

TEST_CASE("edge list round trip")
{
    const auto g = graph_of({"10", "2", "x"}, {{"10", "2"}, {"2", "x"}});
    std::ostringstream out;
    write_edge_list(out, g);
    std::istringstream in(out.str());
    const auto h = read_edge_list(in);
    CHECK(h.nodes() == g.nodes());
    CHECK(h.edges() == g.edges());
    std::istringstream bad("a,a\n");
    CHECK_THROWS_AS(read_edge_list(bad), std::invalid_argument);
}
