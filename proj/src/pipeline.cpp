#include "ridegfl/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "ridegfl/delimited.hpp"

namespace ridegfl {

using nlohmann::json;
namespace fs = std::filesystem;

std::string_view to_string(Variable v)
{
    switch (v) {
    case Variable::idle_time: return "idle_time";
    case Variable::reach_time: return "reach_time";
    case Variable::continuation_payoff: return "continuation_payoff";
    case Variable::driver_productivity: return "driver_productivity";
    }
    return "unknown";
}

Variable variable_from_string(std::string_view s)
{
    for (auto v : {Variable::idle_time, Variable::reach_time, Variable::continuation_payoff,
                   Variable::driver_productivity}) {
        if (to_string(v) == s) return v;
    }
    throw ConfigError("unknown variable: " + std::string(s));
}

bool uses_fares(Variable v) noexcept
{
    return v == Variable::continuation_payoff || v == Variable::driver_productivity;
}

std::string fnv1a_hex(std::string_view data)
{
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void RunConfig::validate() const
{
    if (trips.empty()) throw ConfigError("config: trips path is required");
    if (!fs::exists(trips)) throw ConfigError("config: trips file not found: " + trips.string());
    if (zones.empty() && zone_assignments.empty()) throw ConfigError("config: zones or zone_assignments is required");
    if (!zones.empty() && !fs::exists(zones)) throw ConfigError("config: zones file not found: " + zones.string());
    if (!zone_assignments.empty() && !fs::exists(zone_assignments)) {
        throw ConfigError("config: zone assignment file not found: " + zone_assignments.string());
    }
    if (!covariates.empty() && !fs::exists(covariates)) {
        throw ConfigError("config: covariate file not found: " + covariates.string());
    }
    if (variables.empty()) throw ConfigError("config: at least one variable is required");
    if (fare_modes.empty()) throw ConfigError("config: at least one fare mode is required");
    if (periods.empty()) throw ConfigError("config: at least one period is required");
    for (auto p : periods) {
        if (!is_analysis_period(p)) throw ConfigError("config: period " + std::string(to_string(p)) + " is not analysed");
    }
    if (std::find(variables.begin(), variables.end(), Variable::driver_productivity) != variables.end() &&
        experiment_origins.empty()) {
        throw ConfigError("config: driver_productivity needs experiment_origins");
    }
    if (!(idle_cap > 0.0)) throw ConfigError("config: idle_cap_minutes must be positive");
    if (knn_k < 1) throw ConfigError("config: knn_k must be >= 1");
    if (lambda_grid.empty()) throw ConfigError("config: lambda grid is empty");
    for (std::size_t i = 0; i < lambda_grid.size(); ++i) {
        if (!(lambda_grid[i] >= 0.0) || (i > 0 && !(lambda_grid[i] > lambda_grid[i - 1]))) {
            throw ConfigError("config: lambda grid must be ascending and >= 0");
        }
    }
    tariff.validate();
    try {
        admm.validate();
        split.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    for (const auto& [name, ids] : zone_groups) {
        if (ids.empty()) throw ConfigError("config: zone group " + name + " is empty");
    }
}

namespace {

ZoneId zone_from_json(const json& j)
{
    if (j.is_string()) return ZoneId(j.get<std::string>());
    if (j.is_number_integer()) return ZoneId(std::to_string(j.get<long long>()));
    throw ConfigError("config: zone ids must be strings or integers");
}

fs::path path_from(const json& j, const fs::path& base)
{
    fs::path p = j.get<std::string>();
    return p.is_relative() ? base / p : p;
}

template <class T>
T get_or(const json& obj, const char* key, T fallback)
{
    auto it = obj.find(key);
    return it == obj.end() ? fallback : it->get<T>();
}

void check_keys(const json& obj, std::initializer_list<std::string_view> allowed, const std::string& where)
{
    if (!obj.is_object()) throw ConfigError("config: " + where + " must be an object");
    for (const auto& [k, v] : obj.items()) {
        if (std::find(allowed.begin(), allowed.end(), k) == allowed.end()) {
            throw ConfigError("config: unknown key '" + k + "' in " + where);
        }
    }
}

RateSet rates_from(const json& j, RateSet r)
{
    check_keys(j, {"base", "per_minute", "per_mile", "minimum"}, "tariff");
    r.base = get_or(j, "base", r.base);
    r.per_minute = get_or(j, "per_minute", r.per_minute);
    r.per_mile = get_or(j, "per_mile", r.per_mile);
    r.minimum = get_or(j, "minimum", r.minimum);
    return r;
}

} // namespace

RunConfig parse_run_config(const std::string& text, const fs::path& base_dir)
{
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: not valid JSON: ") + e.what());
    }
    check_keys(j,
               {"trips", "zones", "zone_id_property", "zone_assignments", "covariates", "output_dir", "schema",
                "timezone", "idle_cap_minutes", "window", "tariff", "experiment_origins", "fare_modes", "variables",
                "periods", "lambda_grid", "knn_k", "distance", "admm", "train_fraction", "seed", "zone_groups"},
               "config");
    RunConfig c;
    try {
        if (j.contains("trips")) c.trips = path_from(j["trips"], base_dir);
        if (j.contains("zones")) c.zones = path_from(j["zones"], base_dir);
        if (j.contains("zone_assignments")) c.zone_assignments = path_from(j["zone_assignments"], base_dir);
        if (j.contains("covariates")) c.covariates = path_from(j["covariates"], base_dir);
        if (j.contains("output_dir")) c.output_dir = path_from(j["output_dir"], base_dir);
        c.zone_id_property = get_or<std::string>(j, "zone_id_property", c.zone_id_property);

        if (j.contains("schema")) {
            const auto& s = j["schema"];
            check_keys(s,
                       {"columns", "delimiter", "distance_to_miles", "duration_to_minutes", "duration_tolerance",
                        "timestamp_basis", "class_aliases"},
                       "schema");
            if (s.contains("columns")) {
                for (const auto& [field, col] : s["columns"].items()) {
                    const auto& req = TripSchema::required_fields();
                    const auto& opt = TripSchema::optional_fields();
                    if (std::find(req.begin(), req.end(), field) == req.end() &&
                        std::find(opt.begin(), opt.end(), field) == opt.end()) {
                        throw ConfigError("config: unknown trip field '" + field + "'");
                    }
                    c.schema.columns[field] = col.get<std::string>();
                }
            }
            const auto delim = get_or<std::string>(s, "delimiter", ",");
            if (delim.size() != 1) throw ConfigError("config: delimiter must be one character");
            c.schema.delimiter = delim[0];
            c.schema.distance_to_miles = get_or(s, "distance_to_miles", c.schema.distance_to_miles);
            c.schema.duration_to_minutes = get_or(s, "duration_to_minutes", c.schema.duration_to_minutes);
            c.schema.duration_tolerance = get_or(s, "duration_tolerance", c.schema.duration_tolerance);
            const auto basis = get_or<std::string>(s, "timestamp_basis", "utc");
            if (basis == "utc") c.schema.basis = TimestampBasis::utc;
            else if (basis == "local") c.schema.basis = TimestampBasis::local;
            else throw ConfigError("config: timestamp_basis must be utc or local");
            if (s.contains("class_aliases")) {
                for (const auto& [alias, cls] : s["class_aliases"].items()) {
                    auto vc = parse_vehicle_class(cls.get<std::string>(), {});
                    if (!vc) throw ConfigError("config: unknown vehicle class '" + cls.get<std::string>() + "'");
                    c.schema.class_aliases[alias] = *vc;
                }
            }
        }

        c.timezone = get_or<std::string>(j, "timezone", c.timezone);
        c.idle_cap = get_or(j, "idle_cap_minutes", c.idle_cap);
        if (j.contains("window")) {
            check_keys(j["window"], {"start", "end"}, "window");
            if (j["window"].contains("start")) c.window_start = j["window"]["start"].get<std::string>();
            if (j["window"].contains("end")) c.window_end = j["window"]["end"].get<std::string>();
        }
        if (j.contains("tariff")) c.tariff.standard = rates_from(j["tariff"], c.tariff.standard);
        if (j.contains("experiment_origins")) {
            for (const auto& z : j["experiment_origins"]) c.experiment_origins.insert(zone_from_json(z));
        }
        if (j.contains("fare_modes")) {
            c.fare_modes.clear();
            for (const auto& m : j["fare_modes"]) c.fare_modes.push_back(fare_mode_from_string(m.get<std::string>()));
        }
        if (j.contains("variables")) {
            c.variables.clear();
            for (const auto& v : j["variables"]) c.variables.push_back(variable_from_string(v.get<std::string>()));
        }
        if (j.contains("periods")) {
            c.periods.clear();
            for (const auto& p : j["periods"]) c.periods.push_back(period_from_string(p.get<std::string>()));
        }
        if (j.contains("lambda_grid")) {
            const auto& g = j["lambda_grid"];
            if (g.is_array()) {
                c.lambda_grid = g.get<std::vector<double>>();
            } else {
                check_keys(g, {"min", "max", "count"}, "lambda_grid");
                try {
                    c.lambda_grid = log_grid(get_or(g, "min", 0.001), get_or(g, "max", 100.0),
                                             get_or<std::size_t>(g, "count", 30));
                } catch (const std::invalid_argument& e) {
                    throw ConfigError(std::string("config: ") + e.what());
                }
            }
        }
        c.knn_k = get_or<std::size_t>(j, "knn_k", c.knn_k);
        const auto dist = get_or<std::string>(j, "distance", "degrees");
        if (dist == "degrees") c.distance = DistanceMode::degrees;
        else if (dist == "projected") c.distance = DistanceMode::projected;
        else throw ConfigError("config: distance must be degrees or projected");
        if (j.contains("admm")) {
            const auto& a = j["admm"];
            check_keys(a, {"alpha", "eps_abs", "eps_rel", "max_iters", "adaptive", "polish", "verbose"}, "admm");
            c.admm.alpha = get_or(a, "alpha", c.admm.alpha);
            c.admm.eps_abs = get_or(a, "eps_abs", c.admm.eps_abs);
            c.admm.eps_rel = get_or(a, "eps_rel", c.admm.eps_rel);
            c.admm.max_iters = get_or(a, "max_iters", c.admm.max_iters);
            c.admm.adaptive = get_or(a, "adaptive", c.admm.adaptive);
            c.admm.polish = get_or(a, "polish", c.admm.polish);
            c.admm.record_history = get_or(a, "verbose", c.admm.record_history);
        }
        c.split.train_fraction = get_or(j, "train_fraction", c.split.train_fraction);
        c.split.seed = get_or<std::uint64_t>(j, "seed", c.split.seed);
        if (j.contains("zone_groups")) {
            for (const auto& [name, ids] : j["zone_groups"].items()) {
                auto& members = c.zone_groups[name];
                for (const auto& z : ids) members.push_back(zone_from_json(z));
            }
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: wrong value type: ") + e.what());
    }
    c.config_hash = fnv1a_hex(text);
    return c;
}

RunConfig load_run_config(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_run_config(ss.str(), path.parent_path());
}

std::string Surface::fare_mode_name() const
{
    return fare_mode ? std::string(to_string(*fare_mode)) : std::string("none");
}

std::string Surface::key() const
{
    std::string k = std::string(to_string(variable)) + "_" + std::string(to_string(period));
    if (fare_mode) k += "_" + std::string(to_string(*fare_mode));
    return k;
}

Surface make_surface(Variable v, PeriodBin p, std::optional<FareMode> mode, double lambda, const DenoiseProblem& problem,
                     std::span<const double> x)
{
    const auto& g = problem.layout->graph();
    if (x.size() != g.node_count()) throw std::invalid_argument("surface values do not match the graph");
    Surface s;
    s.variable = v;
    s.period = p;
    s.fare_mode = mode;
    s.lambda = lambda;
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        num += problem.count[i] * x[i];
        den += problem.count[i];
    }
    const double centre = den > 0.0 ? num / den : 0.0;
    s.rows.reserve(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        s.rows.push_back({g.node(i), problem.mean[i], problem.count[i], x[i], x[i] - centre});
    }
    return s;
}

namespace {

json geometry_json(const ZoneGeometry& z)
{
    json polys = json::array();
    for (const auto& poly : z.polygons) {
        json rings = json::array();
        for (const auto& ring : poly.rings) {
            json pts = json::array();
            for (const auto& p : ring) pts.push_back({p.lon, p.lat});
            if (!ring.empty()) pts.push_back({ring.front().lon, ring.front().lat});
            rings.push_back(std::move(pts));
        }
        polys.push_back(std::move(rings));
    }
    return {{"type", "MultiPolygon"}, {"coordinates", std::move(polys)}};
}

} // namespace

std::size_t emit_geojson(std::ostream& out, const Surface& s, const ZoneSet* zones)
{
    std::size_t missing = 0;
    json features = json::array();
    for (const auto& r : s.rows) {
        json props = {{"zone_id", r.zone.str()},
                      {"raw_mean", r.count > 0.0 ? json(r.raw_mean) : json(nullptr)},
                      {"count", r.count},
                      {"denoised", r.denoised},
                      {"delta", r.delta},
                      {"lambda", s.lambda}};
        json f = {{"type", "Feature"}, {"properties", std::move(props)}};
        const ZoneGeometry* g = zones ? zones->find(r.zone) : nullptr;
        if (g) {
            f["geometry"] = geometry_json(*g);
        } else {
            f["geometry"] = nullptr;
            f["properties"]["geometry_missing"] = true;
            ++missing;
        }
        features.push_back(std::move(f));
    }
    json doc = {{"type", "FeatureCollection"},
                {"properties",
                 {{"variable", to_string(s.variable)},
                  {"period", to_string(s.period)},
                  {"fare_mode", s.fare_mode_name()},
                  {"lambda", s.lambda}}},
                {"features", std::move(features)}};
    out << doc.dump(1) << '\n';
    return missing;
}

std::vector<GroupSummary> zone_group_summary(const Surface& s, const std::map<std::string, std::vector<ZoneId>>& groups)
{
    if (groups.empty()) throw std::invalid_argument("no zone groups given");
    std::unordered_map<ZoneId, const SurfaceRow*> by_zone;
    for (const auto& r : s.rows) by_zone.emplace(r.zone, &r);
    std::vector<GroupSummary> out;
    for (const auto& [name, ids] : groups) {
        GroupSummary g;
        g.group = name;
        std::set<ZoneId> seen;
        double raw = 0.0, den = 0.0, plain = 0.0;
        for (const auto& id : ids) {
            if (!seen.insert(id).second) continue;
            auto it = by_zone.find(id);
            if (it == by_zone.end()) continue;
            const auto& r = *it->second;
            ++g.member_zones;
            g.count += r.count;
            raw += r.count * r.raw_mean;
            den += r.count * r.denoised;
            plain += r.denoised;
        }
        if (g.count > 0.0) {
            g.raw_mean = raw / g.count;
            g.denoised = den / g.count;
        } else if (g.member_zones > 0) {
            g.denoised = plain / static_cast<double>(g.member_zones);
        }
        out.push_back(std::move(g));
    }
    return out;
}

namespace {

void write_text(const fs::path& p, const std::string& content)
{
    fs::create_directories(p.parent_path());
    write_file_atomic(p.string(), content);
}

std::string opt_fixed(const std::optional<double>& v) { return v ? format_fixed(*v) : std::string("empty"); }

struct Combination {
    Variable variable;
    PeriodBin period;
    std::optional<FareMode> mode;
    std::vector<ZoneSample> samples;
    Tally sample_rejected;
};

struct SurfaceReport {
    std::string key;
    std::size_t samples = 0;
    std::size_t dropped = 0;
    std::string status;
    double lambda = 0.0;
    int iterations = 0;
    bool converged = true;
    std::size_t train = 0, test = 0;
    Tally sample_rejected;
};

std::map<ZoneId, std::map<std::string, double>> load_covariates(const fs::path& p, char delim,
                                                                std::vector<std::string>& names)
{
    std::ifstream in(p);
    if (!in) throw std::runtime_error("cannot open " + p.string());
    std::vector<std::string> header, fields;
    if (!read_record(in, delim, header) || header.size() < 2 || trim(header[0]) != "zone_id") {
        throw std::runtime_error("covariate file needs a zone_id column followed by covariates");
    }
    for (std::size_t i = 1; i < header.size(); ++i) names.emplace_back(trim(header[i]));
    std::map<ZoneId, std::map<std::string, double>> out;
    while (read_record(in, delim, fields)) {
        if (fields.size() != header.size()) throw std::runtime_error("covariate row has the wrong column count");
        auto& row = out[ZoneId(std::string(trim(fields[0])))];
        for (std::size_t i = 1; i < fields.size(); ++i) {
            row[names[i - 1]] = parse_double(trim(fields[i])).value_or(std::numeric_limits<double>::quiet_NaN());
        }
    }
    return out;
}

} // namespace

RunSummary run_pipeline(const RunConfig& cfg)
{
    std::string stage = "config";
    try {
        cfg.validate();
        const PeriodCalendar calendar{TimeZone::from_name(cfg.timezone), {true, false, false, false, false, false, true}};
        RunSummary summary;

        stage = "ingest";
        std::ifstream trips_in(cfg.trips);
        if (!trips_in) throw std::runtime_error("cannot open " + cfg.trips.string());
        auto parsed = parse_trips(trips_in, cfg.schema, calendar.zone);
        summary.input_rows = parsed.report.rows;
        summary.rejected = parsed.report.rejected;
        std::vector<TripRecord> trips = std::move(parsed.trips);
        if (cfg.window_start || cfg.window_end) {
            auto bound = [&](const std::optional<std::string>& s) -> std::optional<Timestamp> {
                if (!s) return std::nullopt;
                auto ts = parse_timestamp(*s, cfg.schema.basis, calendar.zone);
                if (!ts) throw ConfigError("config: unparseable window bound " + *s);
                return ts;
            };
            const auto lo = bound(cfg.window_start), hi = bound(cfg.window_end);
            std::erase_if(trips, [&](const TripRecord& t) {
                const bool out = (lo && t.pickup_ts < *lo) || (hi && t.pickup_ts >= *hi);
                if (out) ++summary.rejected["outside-window"];
                return out;
            });
        }

        stage = "zones";
        std::optional<ZoneSet> zone_set;
        std::optional<ZoneAssignments> assignments;
        if (!cfg.zones.empty()) {
            std::ifstream zin(cfg.zones);
            if (!zin) throw std::runtime_error("cannot open " + cfg.zones.string());
            zone_set = load_zones_geojson(zin, cfg.zone_id_property);
        }
        if (!cfg.zone_assignments.empty()) {
            std::ifstream ain(cfg.zone_assignments);
            if (!ain) throw std::runtime_error("cannot open " + cfg.zone_assignments.string());
            assignments = load_zone_assignments(ain, cfg.schema.delimiter);
        }
        auto zoned = zone_trips(std::move(trips), zone_set ? &*zone_set : nullptr,
                                assignments ? &*assignments : nullptr, calendar);
        for (const auto& [reason, n] : zoned.rejected) summary.rejected[reason] += n;
        std::vector<ZonedTrip> accepted = std::move(zoned.trips);
        if (const auto dups = drop_duplicate_trips(accepted); dups > 0) summary.rejected["duplicate-trip"] += dups;
        summary.retained_trips = accepted.size();
        if (summary.input_rows != summary.retained_trips + total(summary.rejected)) {
            throw std::logic_error("trip accounting does not balance");
        }

        stage = "metrics";
        auto chained = chain_driver_transitions(accepted, cfg.idle_cap);
        summary.transitions = chained.transitions.size();
        std::vector<DriverTransition> experiment;
        FilterReport filter_report;
        if (!cfg.experiment_origins.empty()) {
            experiment = experiment_filter(chained.transitions, cfg.experiment_origins, &filter_report);
        }

        std::vector<Combination> combos;
        for (auto v : cfg.variables) {
            for (auto p : cfg.periods) {
                if (uses_fares(v)) {
                    for (auto m : cfg.fare_modes) combos.push_back({v, p, m, {}, {}});
                } else {
                    combos.push_back({v, p, std::nullopt, {}, {}});
                }
            }
        }
        for (auto& c : combos) {
            switch (c.variable) {
            case Variable::idle_time:
                for (const auto& tr : chained.transitions) {
                    if (tr.first.dropoff_period == c.period) c.samples.push_back({tr.first.dest_zone, tr.idle_time});
                }
                break;
            case Variable::reach_time:
                for (const auto& t : accepted) {
                    if (t.period == c.period) {
                        c.samples.push_back({t.origin_zone, minutes_between(t.trip.dispatch_ts, t.trip.pickup_ts)});
                    }
                }
                break;
            case Variable::continuation_payoff:
            case Variable::driver_productivity: {
                const bool cont = c.variable == Variable::continuation_payoff;
                for (const auto& tr : cont ? chained.transitions : experiment) {
                    try {
                        auto s = cont ? continuation_payoff(tr, *c.mode, cfg.tariff)
                                      : driver_productivity(tr, *c.mode, cfg.tariff);
                        if (s.period == c.period) c.samples.push_back({s.anchor_zone, s.value});
                    } catch (const Rejection& r) {
                        ++c.sample_rejected[r.reason()];
                    }
                }
                break;
            }
            }
        }

        stage = "graph";
        std::vector<std::pair<ZoneId, LonLat>> observations;
        observations.reserve(2 * accepted.size());
        for (const auto& t : accepted) {
            observations.emplace_back(t.origin_zone, t.trip.pickup_point);
            observations.emplace_back(t.dest_zone, t.trip.dropoff_point);
        }
        std::set<ZoneId> anchor_zones;
        for (const auto& c : combos) {
            for (const auto& s : c.samples) anchor_zones.insert(s.zone);
        }
        const std::vector<ZoneId> extra(anchor_zones.begin(), anchor_zones.end());
        auto centroids = zone_centroids(observations, zone_set ? &*zone_set : nullptr, extra);
        for (const auto& z : centroids.excluded) summary.warnings.push_back("zone " + z.str() + " has no centroid");
        if (centroids.centroids.size() < 2) throw std::runtime_error("fewer than two zones carry data");
        auto graph = knn_graph(centroids.centroids, cfg.knn_k, cfg.distance);
        auto layout = std::make_shared<const GraphLayout>(std::move(graph));
        summary.graph_nodes = layout->graph().node_count();
        summary.graph_edges = layout->graph().edge_count();

        stage = "denoise";
        std::vector<SurfaceReport> reports;
        std::map<std::string, std::string> path_files, diag_files;
        for (auto& c : combos) {
            SurfaceReport rep;
            rep.samples = c.samples.size();
            rep.sample_rejected = c.sample_rejected;
            Surface probe;
            probe.variable = c.variable;
            probe.period = c.period;
            probe.fare_mode = c.mode;
            rep.key = probe.key();
            if (c.samples.empty()) {
                rep.status = "no-samples";
                summary.warnings.push_back(rep.key + ": no samples, surface skipped");
                reports.push_back(std::move(rep));
                continue;
            }
            std::optional<DenoiseProblem> problem;
            DenoiseSolution solution;
            try {
                if (c.samples.size() < 10) {
                    problem = build_problem(layout, c.samples);
                    solution = admm_solve(*problem, 0.0, cfg.admm);
                    rep.status = "too-few-samples";
                    rep.lambda = 0.0;
                    summary.warnings.push_back(rep.key + ": fewer than 10 samples, lambda not selected");
                } else {
                    auto sel = select_lambda(layout, c.samples, cfg.lambda_grid, cfg.split, cfg.admm);
                    rep.status = "selected";
                    rep.lambda = sel.path.selected_lambda();
                    rep.train = sel.train_size;
                    rep.test = sel.test_size;
                    std::ostringstream ps;
                    write_lambda_path(ps, sel.path);
                    path_files[rep.key] = ps.str();
                    problem = std::move(sel.problem);
                    solution = std::move(sel.solution);
                }
            } catch (const SolverError& e) {
                throw std::runtime_error(rep.key + ": " + e.what());
            }
            rep.dropped = problem->dropped_samples;
            rep.iterations = solution.iterations;
            rep.converged = solution.converged;
            if (!solution.converged) summary.warnings.push_back(rep.key + ": ADMM reached the iteration cap");
            if (cfg.admm.record_history) {
                std::ostringstream ds;
                write_diagnostics(ds, solution);
                diag_files[rep.key] = ds.str();
            }
            auto surface = make_surface(c.variable, c.period, c.mode, rep.lambda, *problem, solution.x);
            surface.selected = rep.status == "selected";
            for (const auto& r : surface.rows) {
                if (!std::isfinite(r.denoised)) throw std::runtime_error(rep.key + ": non-finite denoised value");
            }
            summary.surfaces.push_back(std::move(surface));
            reports.push_back(std::move(rep));
        }

        stage = "output";
        const fs::path& out = cfg.output_dir;
        fs::create_directories(out);

        std::ostringstream surf;
        surf << "variable,period,fare_mode,zone_id,raw_mean,count,denoised,delta,lambda\n";
        for (const auto& s : summary.surfaces) {
            for (const auto& r : s.rows) {
                surf << to_string(s.variable) << ',' << to_string(s.period) << ',' << s.fare_mode_name() << ','
                     << quote_field(r.zone.str(), ',') << ',' << (r.count > 0.0 ? format_fixed(r.raw_mean) : "") << ','
                     << static_cast<std::size_t>(r.count) << ',' << format_fixed(r.denoised) << ','
                     << format_fixed(r.delta) << ',' << format_fixed(s.lambda) << '\n';
            }
        }
        write_text(out / "surfaces.csv", surf.str());

        std::size_t missing_geometry = 0;
        for (const auto& s : summary.surfaces) {
            std::ostringstream gj;
            missing_geometry += emit_geojson(gj, s, zone_set ? &*zone_set : nullptr);
            write_text(out / "maps" / (s.key() + ".geojson"), gj.str());
        }
        if (missing_geometry > 0) {
            summary.warnings.push_back(std::to_string(missing_geometry) + " map features have no geometry");
        }
        for (const auto& [key, text] : path_files) write_text(out / "lambda_paths" / (key + ".csv"), text);
        for (const auto& [key, text] : diag_files) write_text(out / "diagnostics" / (key + ".csv"), text);

        if (!cfg.zone_groups.empty()) {
            std::ostringstream gs;
            gs << "variable,period,fare_mode,group,member_zones,count,raw_mean,denoised\n";
            for (const auto& s : summary.surfaces) {
                for (const auto& g : zone_group_summary(s, cfg.zone_groups)) {
                    gs << to_string(s.variable) << ',' << to_string(s.period) << ',' << s.fare_mode_name() << ','
                       << quote_field(g.group, ',') << ',' << g.member_zones << ','
                       << static_cast<std::size_t>(g.count) << ',' << opt_fixed(g.raw_mean) << ','
                       << opt_fixed(g.denoised) << '\n';
                }
            }
            write_text(out / "group_summary.csv", gs.str());
        }

        if (!cfg.covariates.empty()) {
            std::vector<std::string> names;
            const auto cov = load_covariates(cfg.covariates, cfg.schema.delimiter, names);
            std::ostringstream rs;
            rs << "variable,period,fare_mode,covariate,zones,r2,slope,intercept\n";
            for (const auto& s : summary.surfaces) {
                for (const auto& name : names) {
                    std::vector<double> x, c;
                    for (const auto& r : s.rows) {
                        auto it = cov.find(r.zone);
                        if (it == cov.end()) continue;
                        x.push_back(r.denoised);
                        c.push_back(it->second.at(name));
                    }
                    rs << to_string(s.variable) << ',' << to_string(s.period) << ',' << s.fare_mode_name() << ','
                       << quote_field(name, ',') << ',';
                    LinearFit fit;
                    try {
                        fit = linear_r2(x, c);
                    } catch (const std::invalid_argument&) {
                        fit = {};
                    }
                    if (fit.defined) {
                        rs << fit.n << ',' << format_fixed(fit.r2) << ',' << format_fixed(fit.slope) << ','
                           << format_fixed(fit.intercept) << '\n';
                    } else {
                        rs << fit.n << ",undefined,undefined,undefined\n";
                    }
                }
            }
            write_text(out / "covariate_r2.csv", rs.str());
        }

        std::ostringstream edges, trails;
        write_edge_list(edges, layout->graph());
        write_trails(trails, layout->graph(), layout->trails());
        write_text(out / "graph_edges.csv", edges.str());
        write_text(out / "trails.csv", trails.str());

        std::ostringstream m;
        m << "config_hash=" << cfg.config_hash << '\n';
        m << "seed=" << cfg.split.seed << '\n';
        m << "timezone=" << cfg.timezone << '\n';
        m << "input_rows=" << summary.input_rows << '\n';
        m << "retained_trips=" << summary.retained_trips << '\n';
        for (const auto& [reason, n] : summary.rejected) m << "rejected." << reason << '=' << n << '\n';
        m << "transition_pairs=" << chained.report.adjacent_pairs << '\n';
        m << "transitions=" << summary.transitions << '\n';
        for (const auto& [reason, n] : chained.report.excluded) m << "transition_excluded." << reason << '=' << n << '\n';
        if (!cfg.experiment_origins.empty()) {
            m << "experiment_input=" << filter_report.input << '\n';
            m << "experiment_retained=" << filter_report.retained << '\n';
        }
        m << "graph_nodes=" << summary.graph_nodes << '\n';
        m << "graph_edges=" << summary.graph_edges << '\n';
        m << "knn_ties=" << layout->graph().knn_ties << '\n';
        m << "trails=" << layout->trails().trails.size() << '\n';
        m << "centroid_excluded=" << centroids.excluded.size() << '\n';
        m << "missing_geometry=" << missing_geometry << '\n';
        for (const auto& r : reports) {
            const std::string p = "surface." + r.key + ".";
            m << p << "status=" << r.status << '\n';
            m << p << "samples=" << r.samples << '\n';
            m << p << "dropped=" << r.dropped << '\n';
            for (const auto& [reason, n] : r.sample_rejected) m << p << "sample_rejected." << reason << '=' << n << '\n';
            if (r.status == "no-samples") continue;
            m << p << "lambda=" << format_fixed(r.lambda) << '\n';
            m << p << "train=" << r.train << '\n';
            m << p << "test=" << r.test << '\n';
            m << p << "iterations=" << r.iterations << '\n';
            m << p << "converged=" << (r.converged ? "true" : "false") << '\n';
        }
        for (const auto& w : summary.warnings) m << "warning=" << w << '\n';
        write_text(out / "manifest.txt", m.str());
        return summary;
    } catch (const PipelineError&) {
        throw;
    } catch (const std::exception& e) {
        throw PipelineError(stage, e.what());
    }
}

} // namespace ridegfl
