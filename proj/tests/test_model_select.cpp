#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "ridegfl/model_select.hpp"
#include "support/synthetic.hpp"

using namespace ridegfl;

namespace {

std::vector<ZoneSample> numbered(std::size_t n)
{
    std::vector<ZoneSample> s;
    for (std::size_t i = 0; i < n; ++i) s.push_back({ZoneId("z"), double(i)});
    return s;
}

std::shared_ptr<const GraphLayout> grid_layout(std::size_t side)
{
    oracle::EdgeList e;
    for (std::size_t r = 0; r < side; ++r) {
        for (std::size_t c = 0; c < side; ++c) {
            if (c + 1 < side) e.push_back({r * side + c, r * side + c + 1});
            if (r + 1 < side) e.push_back({r * side + c, (r + 1) * side + c});
        }
    }
    return std::make_shared<const GraphLayout>(synth::make_graph(side * side, e));
}

} // namespace

TEST_CASE("split sizes, determinism and partition")
{
    const auto s = numbered(1000);
    const SplitSpec spec{0.9, 42};
    const auto a = split_observations(s, spec);
    CHECK(a.train.size() == 900);
    CHECK(a.test.size() == 100);
    const auto b = split_observations(s, spec);
    CHECK(std::equal(a.train.begin(), a.train.end(), b.train.begin(),
                     [](const ZoneSample& x, const ZoneSample& y) { return x.value == y.value; }));

    std::set<double> seen;
    for (const auto& x : a.train) seen.insert(x.value);
    for (const auto& x : a.test) CHECK(seen.insert(x.value).second);
    CHECK(seen.size() == 1000);
    CHECK(std::is_sorted(a.test.begin(), a.test.end(),
                         [](const ZoneSample& x, const ZoneSample& y) { return x.value < y.value; }));

    const auto c = split_observations(s, SplitSpec{0.9, 43});
    std::set<double> other;
    for (const auto& x : c.test) other.insert(x.value);
    std::set<double> first;
    for (const auto& x : a.test) first.insert(x.value);
    CHECK(other != first);

    CHECK(train_indices(10, {0.9, 1}).size() == 9);
    CHECK(train_indices(11, {0.99, 1}).size() == 10);
    CHECK(train_indices(11, {0.01, 1}).size() == 1);
    CHECK_THROWS_AS(split_observations(numbered(9), spec), std::invalid_argument);
    CHECK_THROWS_AS(train_indices(100, {1.0, 0}), std::invalid_argument);
    CHECK_THROWS_AS(train_indices(100, {0.0, 0}), std::invalid_argument);
}

TEST_CASE("every sample is equally likely to be held out")
{
    const std::size_t n = 20;
    std::vector<int> held(n, 0);
    const int seeds = 4000;
    for (int seed = 0; seed < seeds; ++seed) {
        const auto idx = train_indices(n, {0.9, static_cast<std::uint64_t>(seed)});
        std::vector<bool> in(n, false);
        for (auto i : idx) in[i] = true;
        for (std::size_t i = 0; i < n; ++i) held[i] += !in[i];
    }
    // each index is held out with probability 0.1; 5 standard deviations
    const double expect = 0.1 * seeds, sd = std::sqrt(seeds * 0.1 * 0.9);
    for (auto h : held) CHECK(std::abs(h - expect) < 5 * sd);
}

TEST_CASE("rmse")
{
    const auto g = synth::make_graph(3, {{0, 1}, {1, 2}});
    const std::vector<double> x{1, 2, 3};
    const std::vector<ZoneSample> exact{{ZoneId("0"), 1}, {ZoneId("1"), 2}, {ZoneId("2"), 3}};
    CHECK(rmse(exact, g, x, 0.0) == 0.0);
    const std::vector<ZoneSample> off{{ZoneId("0"), 4}, {ZoneId("2"), -1}, {ZoneId("x"), 10}};
    // residuals 3, -4 and 10 - 7 against the fallback
    CHECK(rmse(off, g, x, 7.0) == doctest::Approx(std::sqrt((9.0 + 16.0 + 9.0) / 3.0)).epsilon(1e-14));

    std::mt19937_64 rng(2);
    std::normal_distribution<double> v(2, 3);
    std::uniform_int_distribution<int> z(0, 2);
    std::vector<ZoneSample> many;
    double sq = 0;
    for (int i = 0; i < 500; ++i) {
        const int k = z(rng);
        many.push_back({ZoneId(std::to_string(k)), v(rng)});
        sq += (many.back().value - x[k]) * (many.back().value - x[k]);
    }
    const double r = rmse(many, g, x, 0.0);
    CHECK(r == doctest::Approx(std::sqrt(sq / 500)).epsilon(1e-12));
    std::shuffle(many.begin(), many.end(), rng);
    CHECK(rmse(many, g, x, 0.0) == doctest::Approx(r).epsilon(1e-12));

    CHECK_THROWS_AS(rmse({}, g, x, 0.0), std::invalid_argument);
}

TEST_CASE("log grid")
{
    const auto g = log_grid();
    REQUIRE(g.size() == 30);
    CHECK(g.front() == 0.001);
    CHECK(g.back() == 100.0);
    for (std::size_t i = 1; i < g.size(); ++i) {
        CHECK(g[i] > g[i - 1]);
        CHECK(std::log(g[i] / g[i - 1]) == doctest::Approx(std::log(1e5) / 29).epsilon(1e-10));
    }
    CHECK(log_grid(2, 2, 1) == std::vector<double>{2});
    CHECK_THROWS_AS(log_grid(0, 1, 5), std::invalid_argument);
    CHECK_THROWS_AS(log_grid(2, 1, 5), std::invalid_argument);
}

TEST_CASE("lambda selection on noiseless piecewise-constant data picks the smallest lambda")
{
    auto layout = grid_layout(5);
    std::vector<ZoneSample> s;
    for (std::size_t i = 0; i < 25; ++i) {
        for (int k = 0; k < 8; ++k) s.push_back({ZoneId(std::to_string(i)), i % 5 < 2 ? 10.0 : 20.0});
    }
    const auto grid = log_grid(0.001, 100, 12);
    const auto sel = select_lambda(layout, s, grid, {0.9, 7});
    CHECK(sel.path.selected == 0);
    CHECK(sel.path.points[0].rmse < 1e-4);
    CHECK(sel.train_size + sel.test_size == s.size());
    CHECK(sel.solution.x.size() == 25);
}

TEST_CASE("lambda selection on pure noise prefers heavy smoothing")
{
    auto layout = grid_layout(6);
    std::mt19937_64 rng(3);
    std::normal_distribution<double> v(15, 4);
    std::vector<ZoneSample> s;
    for (std::size_t i = 0; i < 36; ++i) {
        for (int k = 0; k < 6; ++k) s.push_back({ZoneId(std::to_string(i)), v(rng)});
    }
    const auto grid = log_grid();
    const auto sel = select_lambda(layout, s, grid, {0.9, 1});
    CHECK(sel.path.points[sel.path.selected].rmse < sel.path.points.front().rmse);
    CHECK(sel.path.selected_lambda() > 1.0);
    std::size_t selected = 0;
    for (const auto& p : sel.path.points) selected += p.selected;
    CHECK(selected == 1);
}

TEST_CASE("lambda selection beats the raw means on a planted two-region surface")
{
    auto layout = grid_layout(10);
    std::mt19937_64 rng(11);
    std::normal_distribution<double> noise(0, 6);
    std::uniform_int_distribution<int> cnt(2, 6);
    std::vector<ZoneSample> s;
    for (std::size_t r = 0; r < 10; ++r) {
        for (std::size_t c = 0; c < 10; ++c) {
            const double truth = (r >= 3 && r <= 6 && c >= 3 && c <= 6) ? 30.0 : 15.0;
            for (int k = cnt(rng); k > 0; --k) s.push_back({ZoneId(std::to_string(r * 10 + c)), truth + noise(rng)});
        }
    }
    std::vector<double> grid{0.0};
    for (double l : log_grid()) grid.push_back(l);
    const auto sel = select_lambda(layout, s, grid, {0.9, 5});
    CHECK(sel.path.points[sel.path.selected].rmse < sel.path.points.front().rmse);
    CHECK(sel.path.selected > 0);
    CHECK(sel.path.selected + 1 < grid.size());

    CHECK_THROWS_AS(select_lambda(layout, s, std::vector<double>{1, 1}, {0.9, 5}), std::invalid_argument);
    CHECK_THROWS_AS(select_lambda(layout, s, std::vector<double>{}, {0.9, 5}), std::invalid_argument);
}

TEST_CASE("lambda path output")
{
    LambdaPath p;
    p.points.push_back({0.5, 1.25, 12, true, true, false, ""});
    p.points.push_back({1.0, 1.0, 40, true, false, true, ""});
    p.points.push_back({2.0, 0.0, 0, false, false, false, "boom"});
    p.selected = 1;
    std::ostringstream out;
    write_lambda_path(out, p);
    std::istringstream in(out.str());
    std::string line;
    std::getline(in, line);
    CHECK(line == "lambda,rmse,iterations,status,selected");
    std::getline(in, line);
    CHECK(line.find("converged") != std::string::npos);
    std::getline(in, line);
    CHECK(line.find("iteration-cap") != std::string::npos);
    CHECK(line.back() == '1');
    std::getline(in, line);
    CHECK(line.find("failed") != std::string::npos);
}

TEST_CASE("linear fit")
{
    const std::vector<double> c{1, 2, 3, 4, 5};
    const std::vector<double> x{3, 5, 7, 9, 11};
    const auto f = linear_r2(x, c);
    CHECK(f.defined);
    CHECK(f.r2 == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(f.slope == doctest::Approx(2.0));
    CHECK(f.intercept == doctest::Approx(1.0));

    const std::vector<double> constant{4, 4, 4, 4, 4};
    CHECK_FALSE(linear_r2(constant, c).defined);
    CHECK_FALSE(linear_r2(x, constant).defined);
    CHECK_THROWS_AS(linear_r2(std::vector<double>{1, 2}, std::vector<double>{1, 2}), std::invalid_argument);
    const std::vector<double> gaps{1, NAN, 3, 4, INFINITY};
    CHECK(linear_r2(gaps, c).n == 3);
}

TEST_CASE("R-squared is the squared correlation and ignores pair order")
{
    std::mt19937_64 rng(17);
    std::normal_distribution<double> z(0, 1);
    // x = c + noise with var(noise) chosen for a population R^2 of 0.65
    const double noise_sd = std::sqrt(1.0 / 0.65 - 1.0);
    std::vector<double> c(20000), x(20000);
    for (std::size_t i = 0; i < c.size(); ++i) {
        c[i] = z(rng);
        x[i] = c[i] + noise_sd * z(rng);
    }
    const auto f = linear_r2(x, c);
    CHECK(f.r2 == doctest::Approx(0.65).epsilon(0.02));

    double mx = 0, mc = 0;
    for (std::size_t i = 0; i < c.size(); ++i) {
        mx += x[i];
        mc += c[i];
    }
    mx /= double(c.size());
    mc /= double(c.size());
    double sxy = 0, sxx = 0, scc = 0;
    for (std::size_t i = 0; i < c.size(); ++i) {
        sxy += (x[i] - mx) * (c[i] - mc);
        sxx += (x[i] - mx) * (x[i] - mx);
        scc += (c[i] - mc) * (c[i] - mc);
    }
    CHECK(f.r2 == doctest::Approx(sxy * sxy / (sxx * scc)).epsilon(1e-10));

    std::vector<std::size_t> perm(c.size());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<double> px(c.size()), pc(c.size());
    for (std::size_t i = 0; i < perm.size(); ++i) {
        px[i] = x[perm[i]];
        pc[i] = c[perm[i]];
    }
    CHECK(linear_r2(px, pc).r2 == doctest::Approx(f.r2).epsilon(1e-10));
}
