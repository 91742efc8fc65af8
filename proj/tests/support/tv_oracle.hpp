#pragma once

#include <cstddef>
#include <utility>
#include <vector>

namespace oracle {

using EdgeList = std::vector<std::pair<std::size_t, std::size_t>>;

struct TvResult {
    std::vector<double> x;
    double primal = 0.0;      // objective at x
    double lower_bound = 0.0; // dual value; the optimum lies in [lower_bound, primal]
    long iterations = 0;
};

/// Minimises 0.5 * sum eta_i (y_i - x_i)^2 + lambda * sum_edges |x_a - x_b|
/// by accelerated projected gradient on the box-constrained dual, stopping
/// once the duality gap is below rel_gap * max(1, |primal|). All eta_i > 0.
TvResult solve_tv(const EdgeList& edges, const std::vector<double>& y, const std::vector<double>& eta, double lambda,
                  long max_iters = 1'000'000, double rel_gap = 1e-13);

double tv_objective(const EdgeList& edges, const std::vector<double>& y, const std::vector<double>& eta,
                    double lambda, const std::vector<double>& x);

/// Chain edges (0,1), (1,2), ... for n nodes.
EdgeList chain_edges(std::size_t n);

} // namespace oracle
