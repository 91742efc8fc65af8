#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ridegfl/chain_solver.hpp"
#include "ridegfl/delimited.hpp"
#include "ridegfl/gfl.hpp"
#include "ridegfl/graph.hpp"
#include "ridegfl/pipeline.hpp"

using namespace ridegfl;

namespace {

ZoneGraph load_graph(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    return read_edge_list(in);
}

// zone_id,value rows; a header row is skipped if its value is not numeric.
std::vector<ZoneSample> load_samples(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::vector<ZoneSample> out;
    std::vector<std::string> row;
    bool first = true;
    while (read_record(in, ',', row)) {
        if (row.size() < 2) throw std::runtime_error("value rows need zone_id,value");
        auto v = parse_double(trim(row[1]));
        if (!v) {
            if (first) {
                first = false;
                continue;
            }
            throw std::runtime_error("bad value '" + row[1] + "'");
        }
        first = false;
        out.push_back({ZoneId(std::string(trim(row[0]))), *v});
    }
    return out;
}

int cmd_run(const std::string& config)
{
    const auto cfg = load_run_config(config);
    const auto summary = run_pipeline(cfg);
    std::cout << "input rows:      " << summary.input_rows << '\n'
              << "retained trips:  " << summary.retained_trips << '\n'
              << "transitions:     " << summary.transitions << '\n'
              << "graph:           " << summary.graph_nodes << " zones, " << summary.graph_edges << " edges\n"
              << "surfaces:        " << summary.surfaces.size() << '\n'
              << "output:          " << cfg.output_dir.string() << '\n';
    for (const auto& w : summary.warnings) std::cerr << "warning: " << w << '\n';
    return 0;
}

int cmd_denoise(const std::string& edges, const std::string& values, double lambda, const AdmmConfig& cfg)
{
    auto layout = std::make_shared<const GraphLayout>(load_graph(edges));
    const auto samples = load_samples(values);
    const auto problem = build_problem(layout, samples);
    const auto sol = admm_solve(problem, lambda, cfg);
    if (problem.dropped_samples > 0) std::cerr << "dropped " << problem.dropped_samples << " samples outside the graph\n";
    if (!sol.converged) std::cerr << "warning: iteration cap reached\n";
    std::cerr << "iterations " << sol.iterations << ", objective " << format_fixed(sol.objective, 9) << '\n';
    std::cout << "zone_id,raw_mean,count,denoised\n";
    const auto& g = layout->graph();
    for (std::size_t i = 0; i < g.node_count(); ++i) {
        std::cout << quote_field(g.node(i).str(), ',') << ','
                  << (problem.count[i] > 0.0 ? format_fixed(problem.mean[i]) : "") << ','
                  << static_cast<std::size_t>(problem.count[i]) << ',' << format_fixed(sol.x[i]) << '\n';
    }
    if (cfg.record_history) write_diagnostics(std::cerr, sol);
    return 0;
}

// One target per line, optionally followed by ",weight".
int cmd_chain(const std::string& input, double lambda)
{
    std::ifstream file;
    if (!input.empty() && input != "-") {
        file.open(input);
        if (!file) throw std::runtime_error("cannot open " + input);
    }
    std::istream& in = file.is_open() ? static_cast<std::istream&>(file) : std::cin;
    std::vector<double> y, w;
    std::vector<std::string> row;
    while (read_record(in, ',', row)) {
        auto v = parse_double(trim(row[0]));
        if (!v) throw std::runtime_error("bad target '" + row[0] + "'");
        y.push_back(*v);
        if (row.size() > 1) {
            auto wt = parse_double(trim(row[1]));
            if (!wt) throw std::runtime_error("bad weight '" + row[1] + "'");
            w.push_back(*wt);
        } else {
            w.push_back(1.0);
        }
    }
    const ChainProblem p{y, w, lambda};
    const auto z = solve_chain(p);
    for (double v : z) std::cout << format_fixed(v, 9) << '\n';
    std::cerr << "objective " << format_fixed(chain_objective(p, z), 9) << '\n';
    return 0;
}

int cmd_decompose(const std::string& edges)
{
    const auto g = load_graph(edges);
    const auto d = decompose_trails(g);
    if (auto err = validate_decomposition(g, d); !err.empty()) throw std::logic_error(err);
    write_trails(std::cout, g, d);
    for (std::size_t c = 0; c < d.pseudoedges_per_component.size(); ++c) {
        std::cerr << "component " << c << ": " << d.pseudoedges_per_component[c] << " pseudoedges\n";
    }
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Spatial denoising of ride-hailing driver metrics over zone graphs"};
    app.require_subcommand(1);

    std::string config;
    auto* run = app.add_subcommand("run", "Run the full pipeline from a JSON config");
    run->add_option("--config", config, "Config file")->required()->check(CLI::ExistingFile);

    std::string edges, values;
    double lambda = 0.0;
    AdmmConfig admm;
    auto* denoise = app.add_subcommand("denoise", "Graph-fused lasso on per-zone samples");
    denoise->add_option("--edges", edges, "Edge list (zone_a,zone_b)")->required()->check(CLI::ExistingFile);
    denoise->add_option("--values", values, "Samples (zone_id,value)")->required()->check(CLI::ExistingFile);
    denoise->add_option("--lambda", lambda, "Penalty")->required()->check(CLI::NonNegativeNumber);
    denoise->add_option("--alpha", admm.alpha, "Initial ADMM penalty parameter");
    denoise->add_option("--max-iters", admm.max_iters, "Iteration cap");
    denoise->add_option("--eps-abs", admm.eps_abs, "Absolute tolerance");
    denoise->add_option("--eps-rel", admm.eps_rel, "Relative tolerance");
    denoise->add_flag("--verbose", admm.record_history, "Print residual history to stderr");

    std::string chain_input;
    double chain_lambda = 0.0;
    auto* chain = app.add_subcommand("chain-solve", "1-D fused lasso on a sequence (y[,w] per line)");
    chain->add_option("--lambda", chain_lambda, "Penalty")->required()->check(CLI::NonNegativeNumber);
    chain->add_option("--input", chain_input, "Input file (default stdin)");

    std::string decompose_edges;
    auto* decompose = app.add_subcommand("decompose", "Print the trail decomposition of an edge list");
    decompose->add_option("--edges", decompose_edges, "Edge list (zone_a,zone_b)")->required()->check(CLI::ExistingFile);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) return cmd_run(config);
        if (*denoise) return cmd_denoise(edges, values, lambda, admm);
        if (*chain) return cmd_chain(chain_input, chain_lambda);
        if (*decompose) return cmd_decompose(decompose_edges);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
