#include "ridegfl/model_select.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <stdexcept>

#include "ridegfl/delimited.hpp"

namespace ridegfl {

void SplitSpec::validate() const
{
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw std::invalid_argument("train fraction must be in (0, 1)");
}

namespace {

// Uniform integer in [0, bound) by rejection; std distributions differ
// between standard libraries.
std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t bound)
{
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t v;
    do {
        v = rng();
    } while (v >= limit);
    return v % bound;
}

} // namespace

std::vector<std::size_t> train_indices(std::size_t n, const SplitSpec& spec)
{
    spec.validate();
    if (n < 10) throw std::invalid_argument("at least 10 samples are needed for a train/test split");
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::mt19937_64 rng(spec.seed);
    for (std::size_t i = n - 1; i > 0; --i) std::swap(perm[i], perm[bounded(rng, i + 1)]);
    auto k = static_cast<std::size_t>(std::llround(spec.train_fraction * static_cast<double>(n)));
    k = std::clamp<std::size_t>(k, 1, n - 1);
    perm.resize(k);
    std::sort(perm.begin(), perm.end());
    return perm;
}

Split split_observations(std::span<const ZoneSample> samples, const SplitSpec& spec)
{
    const auto idx = train_indices(samples.size(), spec);
    Split s;
    s.train.reserve(idx.size());
    s.test.reserve(samples.size() - idx.size());
    std::size_t next = 0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (next < idx.size() && idx[next] == i) {
            s.train.push_back(samples[i]);
            ++next;
        } else {
            s.test.push_back(samples[i]);
        }
    }
    return s;
}

double rmse(std::span<const ZoneSample> test, const ZoneGraph& g, std::span<const double> xhat, double fallback)
{
    if (test.empty()) throw std::invalid_argument("rmse of an empty test set");
    if (xhat.size() != g.node_count()) throw std::invalid_argument("estimates do not cover the graph");
    double sq = 0.0;
    for (const auto& s : test) {
        const auto idx = g.index_of(s.zone);
        const double d = s.value - (idx ? xhat[*idx] : fallback);
        sq += d * d;
    }
    return std::sqrt(sq / static_cast<double>(test.size()));
}

std::vector<double> log_grid(double lo, double hi, std::size_t n)
{
    if (!(lo > 0.0) || !(hi >= lo) || n == 0) throw std::invalid_argument("log grid needs 0 < lo <= hi and n >= 1");
    if (n == 1) return {lo};
    std::vector<double> g(n);
    const double a = std::log(lo), b = std::log(hi);
    for (std::size_t i = 0; i < n; ++i) g[i] = std::exp(a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1));
    g.front() = lo;
    g.back() = hi;
    return g;
}

Selection select_lambda(std::shared_ptr<const GraphLayout> layout, std::span<const ZoneSample> samples,
                        std::span<const double> grid, const SplitSpec& spec, const AdmmConfig& cfg)
{
    if (grid.empty()) throw std::invalid_argument("lambda grid is empty");
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!(grid[i] >= 0.0) || !std::isfinite(grid[i])) throw std::invalid_argument("lambda grid values must be finite and >= 0");
        if (i > 0 && !(grid[i] > grid[i - 1])) throw std::invalid_argument("lambda grid must be strictly ascending");
    }

    const auto split = split_observations(samples, spec);
    const auto train = build_problem(layout, split.train);
    double train_sum = 0.0;
    for (const auto& s : split.train) train_sum += s.value;
    const double fallback = train_sum / static_cast<double>(split.train.size());

    Selection sel;
    sel.train_size = split.train.size();
    sel.test_size = split.test.size();
    std::optional<AdmmState> warm;
    std::optional<std::size_t> best;
    std::vector<AdmmState> states(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        LambdaPoint pt;
        pt.lambda = grid[i];
        try {
            auto sol = admm_solve(train, grid[i], cfg, warm ? &*warm : nullptr);
            pt.rmse = rmse(split.test, layout->graph(), sol.x, fallback);
            pt.iterations = sol.iterations;
            pt.converged = sol.converged;
            pt.ok = std::isfinite(pt.rmse);
            warm = sol.state;
            states[i] = std::move(sol.state);
        } catch (const SolverError& e) {
            pt.ok = false;
            pt.error = e.what();
            pt.rmse = std::numeric_limits<double>::quiet_NaN();
        }
        if (pt.ok && (!best || pt.rmse < sel.path.points[*best].rmse)) best = i;
        sel.path.points.push_back(std::move(pt));
    }
    if (!best) throw SolverError("every lambda in the grid failed to solve");
    sel.path.selected = *best;
    sel.path.points[*best].selected = true;

    sel.problem = build_problem(layout, samples);
    sel.solution = admm_solve(sel.problem, grid[*best], cfg, &states[*best]);
    return sel;
}

LinearFit linear_r2(std::span<const double> x, std::span<const double> covariate)
{
    if (x.size() != covariate.size()) throw std::invalid_argument("linear_r2: length mismatch");
    std::vector<std::pair<double, double>> pairs;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (std::isfinite(x[i]) && std::isfinite(covariate[i])) pairs.emplace_back(covariate[i], x[i]);
    }
    if (pairs.size() < 3) throw std::invalid_argument("linear_r2 needs at least 3 finite pairs");
    LinearFit fit;
    fit.n = pairs.size();
    double mc = 0.0, mx = 0.0;
    for (auto [c, v] : pairs) {
        mc += c;
        mx += v;
    }
    mc /= static_cast<double>(fit.n);
    mx /= static_cast<double>(fit.n);
    double scc = 0.0, sxx = 0.0, scx = 0.0;
    for (auto [c, v] : pairs) {
        scc += (c - mc) * (c - mc);
        sxx += (v - mx) * (v - mx);
        scx += (c - mc) * (v - mx);
    }
    if (scc == 0.0 || sxx == 0.0) return fit;
    fit.defined = true;
    fit.slope = scx / scc;
    fit.intercept = mx - fit.slope * mc;
    fit.r2 = std::clamp(scx * scx / (scc * sxx), 0.0, 1.0);
    return fit;
}

void write_lambda_path(std::ostream& out, const LambdaPath& path)
{
    out << "lambda,rmse,iterations,status,selected\n";
    for (const auto& p : path.points) {
        const char* status = !p.ok ? "failed" : (p.converged ? "converged" : "iteration-cap");
        out << format_fixed(p.lambda) << ',' << (p.ok ? format_fixed(p.rmse) : std::string("nan")) << ','
            << p.iterations << ',' << status << ',' << (p.selected ? 1 : 0) << '\n';
    }
}

} // namespace ridegfl
