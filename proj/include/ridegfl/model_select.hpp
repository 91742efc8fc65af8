#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ridegfl/gfl.hpp"

namespace ridegfl {

struct SplitSpec {
    double train_fraction = 0.9;
    std::uint64_t seed = 0;

    void validate() const;
};

struct Split {
    std::vector<ZoneSample> train;
    std::vector<ZoneSample> test;
};

/// Uniformly random sample-level partition. The train set has
/// round(fraction * n) samples (kept within [1, n-1]); both halves keep the
/// input order. Throws std::invalid_argument for fewer than 10 samples.
Split split_observations(std::span<const ZoneSample> samples, const SplitSpec& spec);

/// Indices of the training samples, ascending. Exposed for reproduction.
std::vector<std::size_t> train_indices(std::size_t n, const SplitSpec& spec);

/// Root mean squared error of test samples against per-node estimates.
/// Zones outside the graph are predicted by `fallback`.
double rmse(std::span<const ZoneSample> test, const ZoneGraph& g, std::span<const double> xhat, double fallback);

/// n log-spaced values from lo to hi inclusive.
std::vector<double> log_grid(double lo = 0.001, double hi = 100.0, std::size_t n = 30);

struct LambdaPoint {
    double lambda = 0.0;
    double rmse = 0.0;
    int iterations = 0;
    bool ok = false;        // solve succeeded
    bool converged = false; // within the iteration cap
    bool selected = false;
    std::string error;
};

struct LambdaPath {
    std::vector<LambdaPoint> points;
    std::size_t selected = 0; // index into points
    double selected_lambda() const { return points.at(selected).lambda; }
};

struct Selection {
    LambdaPath path;
    DenoiseProblem problem; // all samples
    DenoiseSolution solution; // refit at the selected lambda
    std::size_t train_size = 0;
    std::size_t test_size = 0;
};

/// Fits on the training split for each lambda in ascending order (warm
/// started), picks the first minimum test RMSE, then refits on all samples.
/// Failed solves are flagged and skipped; throws SolverError if all fail.
Selection select_lambda(std::shared_ptr<const GraphLayout> layout, std::span<const ZoneSample> samples,
                        std::span<const double> grid, const SplitSpec& spec, const AdmmConfig& cfg = {});

struct LinearFit {
    bool defined = false; // false when either variable has zero variance
    std::size_t n = 0;
    double r2 = 0.0;
    double slope = 0.0;
    double intercept = 0.0;
};

/// Ordinary least squares of x on covariate over pairs where both values are
/// finite. Throws std::invalid_argument with fewer than 3 such pairs.
LinearFit linear_r2(std::span<const double> x, std::span<const double> covariate);

/// lambda,rmse,iterations,status,selected
void write_lambda_path(std::ostream& out, const LambdaPath& path);

} // namespace ridegfl
