#pragma once

#include <iosfwd>
#include <memory>
#include <span>
#include <stdexcept>
#include <vector>

#include "ridegfl/graph.hpp"

namespace ridegfl {

/// One observation attached to a zone.
struct ZoneSample {
    ZoneId zone;
    double value = 0.0;
};

class SolverError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A zone graph, its trail decomposition and the slack-variable layout the
/// ADMM iterations run on. Immutable and shareable between problems.
class GraphLayout {
public:
    struct Component {
        std::vector<std::size_t> nodes;
        std::vector<std::size_t> trails;
    };

    explicit GraphLayout(ZoneGraph graph);
    /// Uses a caller-supplied decomposition; throws std::invalid_argument
    /// unless it covers every edge exactly once.
    GraphLayout(ZoneGraph graph, TrailDecomposition trails);

    const ZoneGraph& graph() const noexcept { return graph_; }
    const TrailDecomposition& trails() const noexcept { return trails_; }
    const std::vector<Component>& components() const noexcept { return components_; }

    std::size_t slack_count() const noexcept { return slack_node_.size(); }
    /// Node referenced by each slack position (the sparse binary matrix A).
    std::span<const std::size_t> slack_nodes() const noexcept { return slack_node_; }
    /// Slack positions of trail t are [trail_offset(t), trail_offset(t + 1)).
    std::size_t trail_offset(std::size_t t) const { return trail_offsets_.at(t); }
    /// Slack positions referencing node i.
    std::span<const std::size_t> node_slacks(std::size_t i) const;

private:
    void build();

    ZoneGraph graph_;
    TrailDecomposition trails_;
    std::vector<Component> components_;
    std::vector<std::size_t> slack_node_;
    std::vector<std::size_t> trail_offsets_;
    std::vector<std::size_t> node_slack_offsets_;
    std::vector<std::size_t> node_slack_list_;
};

/// Per-zone aggregates: y_i is the mean of zone i's samples, eta_i their
/// count. Zones without samples keep eta_i = 0.
struct DenoiseProblem {
    std::shared_ptr<const GraphLayout> layout;
    std::vector<double> mean;
    std::vector<double> count;
    std::size_t dropped_samples = 0; // zone not in the graph

    std::size_t size() const noexcept { return mean.size(); }
    /// sum(eta * y) / sum(eta)
    double weighted_mean() const;
};

/// Throws std::invalid_argument when no sample lands in the graph.
DenoiseProblem build_problem(std::shared_ptr<const GraphLayout> layout, std::span<const ZoneSample> samples);

/// Direct construction from aggregates (counts may be fractional weights).
DenoiseProblem make_problem(std::shared_ptr<const GraphLayout> layout, std::vector<double> mean,
                            std::vector<double> count);

struct AdmmConfig {
    double alpha = 1.0;
    double eps_abs = 1e-8;
    double eps_rel = 1e-6;
    int max_iters = 10000;
    bool adaptive = true;
    bool polish = true; // exact re-solve on the fused groups after ADMM stops
    bool record_history = false;

    void validate() const;
};

/// Iterate state carried between solves on the same layout (warm starts).
struct AdmmState {
    std::vector<double> z;
    std::vector<double> u;
    std::vector<double> alpha; // per component
};

struct ResidualRecord {
    std::size_t component = 0;
    int iteration = 0;
    double primal = 0.0;
    double dual = 0.0;
    double objective = 0.0; // of the component
};

struct DenoiseSolution {
    std::vector<double> x;
    int iterations = 0; // max over components
    bool converged = true;
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    double objective = 0.0;
    std::vector<ResidualRecord> history;
    AdmmState state;
};

/// Minimises 0.5 * sum eta_i (y_i - x_i)^2 + lambda * sum_edges |x_r - x_s|
/// by ADMM over the trail decomposition; components are solved separately.
/// Throws SolverError if an iterate becomes non-finite.
DenoiseSolution admm_solve(const DenoiseProblem& p, double lambda, const AdmmConfig& cfg = {},
                           const AdmmState* warm = nullptr);

double objective(const DenoiseProblem& p, std::span<const double> x, double lambda);

/// Total variation sum_edges |x_r - x_s|.
double total_variation(const ZoneGraph& g, std::span<const double> x);

/// component,iteration,primal_residual,dual_residual,objective
void write_diagnostics(std::ostream& out, const DenoiseSolution& s);

} // namespace ridegfl
