#include "ridegfl/gfl.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include "ridegfl/chain_solver.hpp"
#include "ridegfl/delimited.hpp"

namespace ridegfl {

GraphLayout::GraphLayout(ZoneGraph graph) : graph_(std::move(graph))
{
    trails_ = decompose_trails(graph_);
    build();
}

GraphLayout::GraphLayout(ZoneGraph graph, TrailDecomposition trails)
    : graph_(std::move(graph)), trails_(std::move(trails))
{
    if (auto err = validate_decomposition(graph_, trails_); !err.empty()) {
        throw std::invalid_argument("invalid trail decomposition: " + err);
    }
    build();
}

void GraphLayout::build()
{
    const std::size_t n = graph_.node_count();
    std::size_t ncomp = 0;
    const auto label = connected_components(graph_, &ncomp);
    components_.assign(ncomp, {});
    for (std::size_t i = 0; i < n; ++i) components_[label[i]].nodes.push_back(i);

    trail_offsets_.assign(1, 0);
    slack_node_.clear();
    for (std::size_t t = 0; t < trails_.trails.size(); ++t) {
        const auto& trail = trails_.trails[t];
        if (trail.empty()) throw std::invalid_argument("empty trail");
        components_[label[trail.front()]].trails.push_back(t);
        slack_node_.insert(slack_node_.end(), trail.begin(), trail.end());
        trail_offsets_.push_back(slack_node_.size());
    }

    node_slack_offsets_.assign(n + 1, 0);
    for (std::size_t node : slack_node_) ++node_slack_offsets_[node + 1];
    for (std::size_t i = 0; i < n; ++i) node_slack_offsets_[i + 1] += node_slack_offsets_[i];
    node_slack_list_.assign(slack_node_.size(), 0);
    std::vector<std::size_t> fill(node_slack_offsets_.begin(), node_slack_offsets_.end() - 1);
    for (std::size_t j = 0; j < slack_node_.size(); ++j) node_slack_list_[fill[slack_node_[j]]++] = j;
}

std::span<const std::size_t> GraphLayout::node_slacks(std::size_t i) const
{
    const std::size_t b = node_slack_offsets_.at(i);
    const std::size_t e = node_slack_offsets_.at(i + 1);
    return std::span<const std::size_t>(node_slack_list_).subspan(b, e - b);
}

double DenoiseProblem::weighted_mean() const
{
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < mean.size(); ++i) {
        if (count[i] > 0.0) {
            num += count[i] * mean[i];
            den += count[i];
        }
    }
    return den > 0.0 ? num / den : 0.0;
}

DenoiseProblem make_problem(std::shared_ptr<const GraphLayout> layout, std::vector<double> mean,
                            std::vector<double> count)
{
    if (!layout) throw std::invalid_argument("problem needs a graph layout");
    const std::size_t n = layout->graph().node_count();
    if (mean.size() != n || count.size() != n) throw std::invalid_argument("problem vectors do not match the graph");
    for (std::size_t i = 0; i < n; ++i) {
        if (!(count[i] >= 0.0) || !std::isfinite(count[i])) throw std::invalid_argument("zone weights must be finite and >= 0");
        if (count[i] > 0.0 && !std::isfinite(mean[i])) throw std::invalid_argument("zone mean is not finite");
        if (count[i] == 0.0) mean[i] = 0.0;
    }
    DenoiseProblem p;
    p.layout = std::move(layout);
    p.mean = std::move(mean);
    p.count = std::move(count);
    return p;
}

DenoiseProblem build_problem(std::shared_ptr<const GraphLayout> layout, std::span<const ZoneSample> samples)
{
    if (!layout) throw std::invalid_argument("problem needs a graph layout");
    const auto& g = layout->graph();
    std::vector<double> sum(g.node_count(), 0.0), count(g.node_count(), 0.0);
    std::size_t dropped = 0;
    for (const auto& s : samples) {
        auto idx = g.index_of(s.zone);
        if (!idx) {
            ++dropped;
            continue;
        }
        if (!std::isfinite(s.value)) throw std::invalid_argument("sample value for zone " + s.zone.str() + " is not finite");
        sum[*idx] += s.value;
        count[*idx] += 1.0;
    }
    if (dropped == samples.size()) throw std::invalid_argument("no samples fall on the zone graph");
    for (std::size_t i = 0; i < sum.size(); ++i) {
        if (count[i] > 0.0) sum[i] /= count[i];
    }
    auto p = make_problem(std::move(layout), std::move(sum), std::move(count));
    p.dropped_samples = dropped;
    return p;
}

void AdmmConfig::validate() const
{
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw std::invalid_argument("ADMM alpha must be positive");
    if (!(eps_abs >= 0.0) || !(eps_rel >= 0.0) || (eps_abs == 0.0 && eps_rel == 0.0)) {
        throw std::invalid_argument("ADMM tolerances must be >= 0 and not both zero");
    }
    if (max_iters < 1) throw std::invalid_argument("ADMM max_iters must be >= 1");
}

double total_variation(const ZoneGraph& g, std::span<const double> x)
{
    double tv = 0.0;
    for (const auto& e : g.edges()) tv += std::abs(x[e.a] - x[e.b]);
    return tv;
}

double objective(const DenoiseProblem& p, std::span<const double> x, double lambda)
{
    if (x.size() != p.size()) throw std::invalid_argument("objective: length mismatch");
    double loss = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = p.mean[i] - x[i];
        loss += p.count[i] * d * d;
    }
    return 0.5 * loss + lambda * total_variation(p.layout->graph(), x);
}

namespace {

// Unobserved nodes take the weighted mean of the nearest observed nodes (by
// hop count, each counted once per shortest path) in their component, or
// `fallback` if the component has none.
void fill_unobserved(const ZoneGraph& g, const std::vector<std::size_t>& nodes, const DenoiseProblem& p,
                     std::vector<double>& x, double fallback)
{
    std::vector<int> dist(g.node_count(), -1);
    std::deque<std::size_t> queue;
    for (std::size_t i : nodes) {
        if (p.count[i] > 0.0) {
            x[i] = p.mean[i];
            dist[i] = 0;
            queue.push_back(i);
        }
    }
    if (queue.empty()) {
        for (std::size_t i : nodes) x[i] = fallback;
        return;
    }
    std::vector<double> num(g.node_count(), 0.0), den(g.node_count(), 0.0);
    while (!queue.empty()) {
        const std::size_t v = queue.front();
        queue.pop_front();
        for (std::size_t w : g.neighbors(v)) {
            if (dist[w] == -1) {
                dist[w] = dist[v] + 1;
                queue.push_back(w);
            }
            if (dist[w] == dist[v] + 1) {
                // carry the nearest-source weighted sums outward
                const double wn = dist[v] == 0 ? p.count[v] * p.mean[v] : num[v];
                const double wd = dist[v] == 0 ? p.count[v] : den[v];
                num[w] += wn;
                den[w] += wd;
            }
        }
    }
    for (std::size_t i : nodes) {
        if (dist[i] > 0) x[i] = num[i] / den[i];
    }
}

double norm2(double sq) { return std::sqrt(sq); }

struct ComponentResult {
    int iterations = 0;
    bool converged = true;
    double primal = 0.0;
    double dual = 0.0;
};

class ComponentSolver {
public:
    ComponentSolver(const DenoiseProblem& p, double lambda, const AdmmConfig& cfg, std::size_t comp_index,
                    std::vector<double>& x, std::vector<double>& z, std::vector<double>& u, double& alpha,
                    std::vector<ResidualRecord>* history)
        : p_(p), layout_(*p.layout), comp_(layout_.components()[comp_index]), lambda_(lambda), cfg_(cfg),
          comp_index_(comp_index), x_(x), z_(z), u_(u), alpha_(alpha), history_(history)
    {
        for (std::size_t t : comp_.trails) {
            for (std::size_t j = layout_.trail_offset(t); j < layout_.trail_offset(t + 1); ++j) slacks_.push_back(j);
        }
    }

    [[noreturn]] void fail(int it, const ComponentResult& last, const char* what) const
    {
        std::ostringstream msg;
        msg << "ADMM produced a non-finite " << what << ": component " << comp_index_ << ", iteration " << it
            << ", alpha " << alpha_ << ", last primal " << last.primal << ", last dual " << last.dual;
        throw SolverError(msg.str());
    }

    ComponentResult run()
    {
        ComponentResult res;
        res.converged = false;
        const double sqrt_p = std::sqrt(static_cast<double>(slacks_.size()));
        const double sqrt_n = std::sqrt(static_cast<double>(comp_.nodes.size()));
        std::vector<double> z_old(slacks_.size());
        std::vector<double> targets, weights;
        ChainWorkspace ws;

        for (int it = 1; it <= cfg_.max_iters; ++it) {
            update_x();

            for (std::size_t k = 0; k < slacks_.size(); ++k) z_old[k] = z_[slacks_[k]];
            for (std::size_t t : comp_.trails) {
                const std::size_t b = layout_.trail_offset(t), e = layout_.trail_offset(t + 1);
                targets.resize(e - b);
                weights.assign(e - b, 0.5 * alpha_);
                for (std::size_t j = b; j < e; ++j) {
                    targets[j - b] = x_[layout_.slack_nodes()[j]] + u_[j];
                    if (!std::isfinite(targets[j - b])) fail(it, res, "chain target");
                }
                ChainProblem cp{targets, weights, lambda_};
                solve_chain(cp, std::span<double>(z_).subspan(b, e - b), ws);
            }

            double r_sq = 0.0, ax_sq = 0.0, z_sq = 0.0;
            for (std::size_t j : slacks_) {
                const double ax = x_[layout_.slack_nodes()[j]];
                const double r = ax - z_[j];
                u_[j] += r;
                r_sq += r * r;
                ax_sq += ax * ax;
                z_sq += z_[j] * z_[j];
            }
            double s_sq = 0.0, atu_sq = 0.0;
            for (std::size_t i : comp_.nodes) {
                double dz = 0.0, su = 0.0;
                for (std::size_t j : layout_.node_slacks(i)) {
                    const std::size_t k = local_index(j);
                    dz += z_[j] - z_old[k];
                    su += u_[j];
                }
                s_sq += dz * dz;
                atu_sq += su * su;
            }
            const double primal = norm2(r_sq);
            const double dual = alpha_ * norm2(s_sq);
            const double eps_pri = sqrt_p * cfg_.eps_abs + cfg_.eps_rel * std::max(norm2(ax_sq), norm2(z_sq));
            const double eps_dual = sqrt_n * cfg_.eps_abs + cfg_.eps_rel * alpha_ * norm2(atu_sq);

            if (!std::isfinite(primal) || !std::isfinite(dual)) fail(it, res, "residual");

            res.iterations = it;
            res.primal = primal;
            res.dual = dual;
            if (history_) history_->push_back({comp_index_, it, primal, dual, component_objective()});

            if (primal <= eps_pri && dual <= eps_dual) {
                res.converged = true;
                break;
            }
            if (cfg_.adaptive) {
                if (primal > 10.0 * dual) {
                    alpha_ *= 2.0;
                    for (std::size_t j : slacks_) u_[j] *= 0.5;
                } else if (dual > 10.0 * primal) {
                    alpha_ *= 0.5;
                    for (std::size_t j : slacks_) u_[j] *= 2.0;
                }
            }
        }
        return res;
    }

private:
    void update_x()
    {
        for (std::size_t i : comp_.nodes) {
            double acc = 0.0;
            const auto js = layout_.node_slacks(i);
            for (std::size_t j : js) acc += z_[j] - u_[j];
            const double eta = p_.count[i];
            x_[i] = (eta * p_.mean[i] + alpha_ * acc) / (eta + alpha_ * static_cast<double>(js.size()));
        }
    }

    std::size_t local_index(std::size_t j)
    {
        if (slack_local_.empty()) {
            slack_local_.assign(layout_.slack_count(), 0);
            for (std::size_t k = 0; k < slacks_.size(); ++k) slack_local_[slacks_[k]] = k;
        }
        return slack_local_[j];
    }

    double component_objective() const
    {
        double loss = 0.0, tv = 0.0;
        for (std::size_t i : comp_.nodes) {
            const double d = p_.mean[i] - x_[i];
            loss += p_.count[i] * d * d;
        }
        for (std::size_t t : comp_.trails) {
            const auto& trail = layout_.trails().trails[t];
            for (std::size_t k = 0; k + 1 < trail.size(); ++k) tv += std::abs(x_[trail[k + 1]] - x_[trail[k]]);
        }
        return 0.5 * loss + lambda_ * tv;
    }

    const DenoiseProblem& p_;
    const GraphLayout& layout_;
    const GraphLayout::Component& comp_;
    double lambda_;
    const AdmmConfig& cfg_;
    std::size_t comp_index_;
    std::vector<double>& x_;
    std::vector<double>& z_;
    std::vector<double>& u_;
    double& alpha_;
    std::vector<ResidualRecord>* history_;
    std::vector<std::size_t> slacks_;
    std::vector<std::size_t> slack_local_;
};

// Re-solves the fused groups found by ADMM exactly: each group takes the
// value that zeroes its subgradient given the signs toward its neighbours.
// Kept only when the signs still hold and the objective does not increase.
bool polish_component(const DenoiseProblem& p, double lambda, const GraphLayout::Component& comp,
                      std::vector<double>& x, std::vector<double>& z)
{
    const auto& layout = *p.layout;
    const auto& g = layout.graph();
    const auto slack_node = layout.slack_nodes();
    std::unordered_map<std::size_t, std::size_t> parent;
    for (std::size_t i : comp.nodes) parent[i] = i;
    auto find = [&](std::size_t i) {
        while (parent[i] != i) i = parent[i] = parent[parent[i]];
        return i;
    };
    for (std::size_t t : comp.trails) {
        for (std::size_t j = layout.trail_offset(t); j + 1 < layout.trail_offset(t + 1); ++j) {
            if (z[j] == z[j + 1]) parent[find(slack_node[j])] = find(slack_node[j + 1]);
        }
    }
    struct Group {
        double weight = 0.0, weighted_sum = 0.0, level = 0.0, pull = 0.0, value = 0.0;
        std::size_t size = 0;
    };
    std::unordered_map<std::size_t, Group> groups;
    for (std::size_t i : comp.nodes) {
        auto& gr = groups[find(i)];
        gr.weight += p.count[i];
        gr.weighted_sum += p.count[i] * p.mean[i];
        gr.level += x[i];
        ++gr.size;
    }
    for (auto& [root, gr] : groups) {
        if (gr.weight == 0.0) return false;
        gr.level /= static_cast<double>(gr.size);
    }
    struct Boundary {
        std::size_t a, b;
        double sign;
    };
    std::vector<Boundary> boundary;
    for (std::size_t i : comp.nodes) {
        for (std::size_t j : g.neighbors(i)) {
            if (j < i) continue;
            const std::size_t a = find(i), b = find(j);
            if (a == b) continue;
            const double d = groups[b].level - groups[a].level;
            if (d == 0.0) return false;
            const double s = d > 0.0 ? 1.0 : -1.0;
            groups[a].pull += s;
            groups[b].pull -= s;
            boundary.push_back({a, b, s});
        }
    }
    for (auto& [root, gr] : groups) gr.value = (gr.weighted_sum + lambda * gr.pull) / gr.weight;
    for (const auto& e : boundary) {
        const double d = groups[e.b].value - groups[e.a].value;
        if (!(d * e.sign > 0.0)) return false;
    }

    std::vector<double> candidate = x;
    for (std::size_t i : comp.nodes) candidate[i] = groups[find(i)].value;
    if (!(objective(p, candidate, lambda) <= objective(p, x, lambda))) return false;
    x = std::move(candidate);
    for (std::size_t t : comp.trails) {
        for (std::size_t j = layout.trail_offset(t); j < layout.trail_offset(t + 1); ++j) z[j] = x[slack_node[j]];
    }
    return true;
}

} // namespace

DenoiseSolution admm_solve(const DenoiseProblem& p, double lambda, const AdmmConfig& cfg, const AdmmState* warm)
{
    cfg.validate();
    if (!p.layout) throw std::invalid_argument("problem has no graph layout");
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw std::invalid_argument("lambda must be finite and >= 0");
    const auto& layout = *p.layout;
    const auto& g = layout.graph();
    const std::size_t n = g.node_count();
    if (p.mean.size() != n || p.count.size() != n) throw std::invalid_argument("problem does not match its graph");

    const double fallback = p.weighted_mean();
    const auto& comps = layout.components();
    const std::size_t m = layout.slack_count();
    const bool warm_ok = warm && warm->z.size() == m && warm->u.size() == m && warm->alpha.size() == comps.size();

    DenoiseSolution sol;
    sol.x.assign(n, 0.0);
    sol.state.z.assign(m, 0.0);
    sol.state.u.assign(m, 0.0);
    sol.state.alpha.assign(comps.size(), cfg.alpha);
    if (warm_ok) sol.state = *warm;

    auto& z = sol.state.z;
    auto& u = sol.state.u;
    auto* history = cfg.record_history ? &sol.history : nullptr;
    const auto slack_node = layout.slack_nodes();

    for (std::size_t c = 0; c < comps.size(); ++c) {
        const auto& comp = comps[c];
        double weight = 0.0;
        for (std::size_t i : comp.nodes) weight += p.count[i];

        if (comp.trails.empty() || weight == 0.0 || lambda == 0.0) {
            fill_unobserved(g, comp.nodes, p, sol.x, fallback);
            for (std::size_t t : comp.trails) {
                for (std::size_t j = layout.trail_offset(t); j < layout.trail_offset(t + 1); ++j) {
                    z[j] = sol.x[slack_node[j]];
                    u[j] = 0.0;
                }
            }
            continue;
        }

        if (!warm_ok) {
            std::vector<double> start(n, 0.0);
            fill_unobserved(g, comp.nodes, p, start, fallback);
            for (std::size_t t : comp.trails) {
                for (std::size_t j = layout.trail_offset(t); j < layout.trail_offset(t + 1); ++j) {
                    z[j] = start[slack_node[j]];
                    u[j] = 0.0;
                }
            }
        }
        if (!(sol.state.alpha[c] > 0.0) || !std::isfinite(sol.state.alpha[c])) sol.state.alpha[c] = cfg.alpha;

        ComponentSolver solver(p, lambda, cfg, c, sol.x, z, u, sol.state.alpha[c], history);
        const auto res = solver.run();
        if (cfg.polish) polish_component(p, lambda, comp, sol.x, z);
        sol.iterations = std::max(sol.iterations, res.iterations);
        sol.converged = sol.converged && res.converged;
        sol.primal_residual = std::max(sol.primal_residual, res.primal);
        sol.dual_residual = std::max(sol.dual_residual, res.dual);
    }

    sol.objective = objective(p, sol.x, lambda);
    return sol;
}

void write_diagnostics(std::ostream& out, const DenoiseSolution& s)
{
    out << "component,iteration,primal_residual,dual_residual,objective\n";
    for (const auto& r : s.history) {
        out << r.component << ',' << r.iteration << ',' << format_fixed(r.primal, 12) << ','
            << format_fixed(r.dual, 12) << ',' << format_fixed(r.objective, 9) << '\n';
    }
}

} // namespace ridegfl
