#pragma once

#include <span>
#include <vector>

namespace ridegfl {

/// Weighted 1-D fused lasso:
///
///     minimize  sum_i w_i (y_i - z_i)^2 + lambda * sum_i |z_{i+1} - z_i|
///
/// Targets and weights have equal length, weights are > 0, lambda >= 0.
struct ChainProblem {
    std::span<const double> targets;
    std::span<const double> weights;
    double lambda = 0.0;
};

/// Scratch buffers reused across solves to avoid per-call allocation.
class ChainWorkspace {
public:
    void reserve(std::size_t n);

private:
    friend void solve_chain(const ChainProblem&, std::span<double>, ChainWorkspace&);
    std::vector<double> knots_, slope_, offset_, lower_, upper_;
};

/// Exact minimiser in O(n) by forward message passing over the piecewise
/// linear derivative of the cost-to-go, followed by back-pointer clipping.
/// Throws std::invalid_argument when the problem is malformed.
void solve_chain(const ChainProblem& problem, std::span<double> out, ChainWorkspace& ws);

std::vector<double> solve_chain(const ChainProblem& problem);

double chain_objective(const ChainProblem& problem, std::span<const double> z);

} // namespace ridegfl
