#include "ridegfl/chain_solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>

namespace ridegfl {

void ChainWorkspace::reserve(std::size_t n)
{
    if (knots_.size() < 2 * n) {
        knots_.resize(2 * n);
        slope_.resize(2 * n);
        offset_.resize(2 * n);
    }
    if (lower_.size() < n) {
        lower_.resize(n);
        upper_.resize(n);
    }
}

namespace {

void validate(const ChainProblem& p, std::size_t out_size)
{
    if (p.targets.size() != p.weights.size()) throw std::invalid_argument("chain targets and weights differ in length");
    if (out_size != p.targets.size()) throw std::invalid_argument("chain output has the wrong length");
    if (!(p.lambda >= 0.0) || !std::isfinite(p.lambda)) throw std::invalid_argument("chain lambda must be finite and >= 0");
    for (std::size_t i = 0; i < p.targets.size(); ++i) {
        if (!std::isfinite(p.targets[i])) throw std::invalid_argument("chain target is not finite");
        if (!(p.weights[i] > 0.0) || !std::isfinite(p.weights[i])) {
            throw std::invalid_argument("chain weights must be positive and finite");
        }
    }
}

} // namespace

// The derivative of the cost-to-go is kept as a sorted run of knots
// x[l..r]. Left of every knot it equals left_slope*b + left_offset; crossing
// knot j adds (slope[j], offset[j]). The rightmost piece is tracked as well
// so both ends can be trimmed without walking the whole run. Derivatives are
// of 0.5*c*(y-b)^2 with c = 2w.
void solve_chain(const ChainProblem& p, std::span<double> out, ChainWorkspace& ws)
{
    validate(p, out.size());
    const std::size_t n = p.targets.size();
    if (n == 0) return;
    if (n == 1 || p.lambda == 0.0) {
        std::copy(p.targets.begin(), p.targets.end(), out.begin());
        return;
    }

    ws.reserve(n);
    double* x = ws.knots_.data();
    double* ds = ws.slope_.data();
    double* dof = ws.offset_.data();
    double* lower = ws.lower_.data();
    double* upper = ws.upper_.data();
    const double lam = p.lambda;
    const auto& y = p.targets;
    const auto& w = p.weights;

    std::ptrdiff_t l = static_cast<std::ptrdiff_t>(n);
    std::ptrdiff_t r = l - 1;
    double c = 2.0 * w[0];
    double left_slope = c, left_offset = -c * y[0];
    double right_slope = c, right_offset = -c * y[0];

    for (std::size_t k = 1; k < n; ++k) {
        // point where the derivative reaches -lambda
        double s = left_slope, o = left_offset;
        std::ptrdiff_t lo = l;
        while (lo <= r && s * x[lo] + o <= -lam) {
            s += ds[lo];
            o += dof[lo];
            ++lo;
        }
        const double t_minus = (-lam - o) / s;

        // point where it reaches +lambda
        double S = right_slope, O = right_offset;
        std::ptrdiff_t hi = r;
        while (hi >= lo && S * x[hi] + O >= lam) {
            S -= ds[hi];
            O -= dof[hi];
            --hi;
        }
        const double t_plus = (lam - O) / S;

        l = lo - 1;
        x[l] = t_minus;
        ds[l] = s;
        dof[l] = o + lam;
        r = hi + 1;
        x[r] = t_plus;
        ds[r] = -S;
        dof[r] = lam - O;

        lower[k - 1] = t_minus;
        upper[k - 1] = t_plus;

        c = 2.0 * w[k];
        left_slope = c;
        left_offset = -lam - c * y[k];
        right_slope = c;
        right_offset = lam - c * y[k];
    }

    double s = left_slope, o = left_offset;
    for (std::ptrdiff_t j = l; j <= r && s * x[j] + o <= 0.0; ++j) {
        s += ds[j];
        o += dof[j];
    }
    out[n - 1] = -o / s;
    for (std::size_t k = n - 1; k-- > 0;) out[k] = std::min(std::max(out[k + 1], lower[k]), upper[k]);
}

std::vector<double> solve_chain(const ChainProblem& problem)
{
    std::vector<double> out(problem.targets.size());
    ChainWorkspace ws;
    solve_chain(problem, out, ws);
    return out;
}

double chain_objective(const ChainProblem& problem, std::span<const double> z)
{
    if (z.size() != problem.targets.size()) throw std::invalid_argument("chain objective: length mismatch");
    double loss = 0.0;
    double tv = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        const double d = problem.targets[i] - z[i];
        loss += problem.weights[i] * d * d;
        if (i + 1 < z.size()) tv += std::abs(z[i + 1] - z[i]);
    }
    return loss + problem.lambda * tv;
}

} // namespace ridegfl
