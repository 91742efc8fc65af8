#include <doctest.h>

#include <cmath>
#include <random>
#include <stdexcept>

#include "ridegfl/chain_solver.hpp"
#include "support/tv_oracle.hpp"

using namespace ridegfl;

namespace {

std::vector<double> solve(const std::vector<double>& y, const std::vector<double>& w, double lambda)
{
    return solve_chain(ChainProblem{y, w, lambda});
}

// Largest violation of the optimality conditions
//   2 w_i (z_i - y_i) + lambda (s_{i-1} - s_i) = 0,  s_i in sign(z_{i+1} - z_i),  s_0 = s_n = 0.
double kkt_violation(const std::vector<double>& y, const std::vector<double>& w, double lambda,
                     const std::vector<double>& z, double fuse_tol)
{
    double s = 0.0, worst = 0.0;
    for (std::size_t i = 0; i + 1 < z.size(); ++i) {
        s += 2.0 * w[i] * (z[i] - y[i]) / lambda;
        const double d = z[i + 1] - z[i];
        if (d > fuse_tol) worst = std::max(worst, std::abs(s - 1.0));
        else if (d < -fuse_tol) worst = std::max(worst, std::abs(s + 1.0));
        else worst = std::max(worst, std::max(0.0, std::abs(s) - 1.0));
    }
    s += 2.0 * w.back() * (z.back() - y.back()) / lambda;
    return std::max(worst, std::abs(s));
}

} // namespace

TEST_CASE("chain examples")
{
    const auto flat = solve({3, 3, 3}, {1, 2, 3}, 5.0);
    for (double v : flat) CHECK(v == doctest::Approx(3.0).epsilon(1e-12));

    const auto two = solve({0, 2}, {0.5, 0.5}, 0.5);
    CHECK(two[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(two[1] == doctest::Approx(1.5).epsilon(1e-12));

    const auto three = solve({4, 0, 4}, {0.5, 0.5, 0.5}, 1.0);
    CHECK(std::abs(three[0] - 3.0) <= 1e-9);
    CHECK(std::abs(three[1] - 2.0) <= 1e-9);
    CHECK(std::abs(three[2] - 3.0) <= 1e-9);

    // unit weights: each end moves by lambda / (2w) until they fuse at lambda = 2
    const auto unit = solve({0, 2}, {1, 1}, 1.0);
    CHECK(unit[0] == doctest::Approx(0.5));
    CHECK(unit[1] == doctest::Approx(1.5));
    const auto fused = solve({0, 2}, {1, 1}, 2.5);
    CHECK(fused[0] == doctest::Approx(1.0));
    CHECK(fused[1] == doctest::Approx(1.0));
}

TEST_CASE("degenerate chains")
{
    CHECK(solve({}, {}, 1.0).empty());
    CHECK(solve({7.5}, {2.0}, 100.0) == std::vector<double>{7.5});
    const std::vector<double> y{1, -2, 5, 0.25};
    CHECK(solve(y, {1, 1, 1, 1}, 0.0) == y);
}

TEST_CASE("malformed chains are rejected")
{
    CHECK_THROWS_AS(solve({1, 2}, {1}, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(solve({1, 2}, {1, 0}, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(solve({1, 2}, {1, 1}, -1.0), std::invalid_argument);
    CHECK_THROWS_AS(solve({1, NAN}, {1, 1}, 1.0), std::invalid_argument);
    std::vector<double> out(3);
    ChainWorkspace ws;
    const std::vector<double> y{1, 2}, w{1, 1};
    CHECK_THROWS_AS(solve_chain(ChainProblem{y, w, 1.0}, out, ws), std::invalid_argument);
}

TEST_CASE("large lambda fuses to the weighted mean")
{
    const std::vector<double> y{1, 8, -3, 4, 10}, w{1, 2, 0.5, 3, 1};
    double num = 0, den = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        num += w[i] * y[i];
        den += w[i];
    }
    for (double v : solve(y, w, 1e4)) CHECK(v == doctest::Approx(num / den).epsilon(1e-12));
}

TEST_CASE("chain properties on random inputs")
{
    std::mt19937_64 rng(77);
    std::uniform_int_distribution<std::size_t> len(2, 60);
    std::uniform_real_distribution<double> val(-10, 10), wt(0.05, 5), lam(0.01, 20), shift(-100, 100);
    ChainWorkspace ws;
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t n = len(rng);
        std::vector<double> y(n), w(n);
        for (std::size_t i = 0; i < n; ++i) {
            y[i] = val(rng);
            w[i] = wt(rng);
        }
        const double lambda = lam(rng);
        std::vector<double> z(n);
        solve_chain(ChainProblem{y, w, lambda}, z, ws);
        CHECK(kkt_violation(y, w, lambda, z, 1e-9) <= 1e-8);

        const double c = shift(rng);
        std::vector<double> ys(y);
        for (auto& v : ys) v += c;
        const auto zs = solve(ys, w, lambda);
        for (std::size_t i = 0; i < n; ++i) CHECK(zs[i] - c == doctest::Approx(z[i]).epsilon(1e-9).scale(10));
    }
}

TEST_CASE("chain objective against the dual oracle")
{
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<std::size_t> len(2, 50);
    std::uniform_real_distribution<double> val(-5, 5), wt(0.1, 3), lam(0.05, 8);
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t n = len(rng);
        std::vector<double> y(n), w(n), eta(n);
        for (std::size_t i = 0; i < n; ++i) {
            y[i] = val(rng);
            w[i] = wt(rng);
            eta[i] = 2.0 * w[i];
        }
        const double lambda = lam(rng);
        const ChainProblem p{y, w, lambda};
        const auto z = solve_chain(p);
        const auto ref = oracle::solve_tv(oracle::chain_edges(n), y, eta, lambda);
        const double obj = chain_objective(p, z);
        CHECK(obj <= ref.primal + 1e-8 * std::max(1.0, ref.primal));
        CHECK(obj >= ref.lower_bound - 1e-8 * std::max(1.0, ref.primal));
    }
}
