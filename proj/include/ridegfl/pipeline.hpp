#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "ridegfl/fares.hpp"
#include "ridegfl/gfl.hpp"
#include "ridegfl/graph.hpp"
#include "ridegfl/model_select.hpp"
#include "ridegfl/trips.hpp"
#include "ridegfl/zones.hpp"

namespace ridegfl {

enum class Variable { idle_time, reach_time, continuation_payoff, driver_productivity };
std::string_view to_string(Variable v);
Variable variable_from_string(std::string_view s);
/// idle and reach times do not depend on fares.
bool uses_fares(Variable v) noexcept;

struct RunConfig {
    std::filesystem::path trips;
    std::filesystem::path zones;            // GeoJSON; optional with zone_assignments
    std::filesystem::path zone_assignments; // optional
    std::filesystem::path covariates;       // optional: zone_id plus numeric columns
    std::filesystem::path output_dir = "out";
    std::string zone_id_property = "zone_id";

    TripSchema schema = TripSchema::identity();
    std::string timezone = "America/Chicago";
    double idle_cap = 60.0;
    std::optional<std::string> window_start; // pickup time, inclusive
    std::optional<std::string> window_end;   // exclusive

    Tariff tariff;
    std::set<ZoneId> experiment_origins;
    std::vector<FareMode> fare_modes{FareMode::flat, FareMode::surge};
    std::vector<Variable> variables{Variable::idle_time, Variable::reach_time, Variable::continuation_payoff,
                                    Variable::driver_productivity};
    std::vector<PeriodBin> periods{PeriodBin::weekday_peak, PeriodBin::weekday_midday, PeriodBin::weekday_overnight,
                                   PeriodBin::weekend};

    std::vector<double> lambda_grid = log_grid();
    std::size_t knn_k = 4;
    DistanceMode distance = DistanceMode::degrees;
    AdmmConfig admm;
    SplitSpec split;
    std::map<std::string, std::vector<ZoneId>> zone_groups;

    std::string config_hash; // FNV-1a of the config text, set by the loader

    /// Throws ConfigError.
    void validate() const;
};

/// Parses a JSON run configuration. Relative paths are resolved against
/// `base_dir`.
RunConfig parse_run_config(const std::string& text, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);

/// 64-bit FNV-1a as 16 hex digits.
std::string fnv1a_hex(std::string_view data);

struct SurfaceRow {
    ZoneId zone;
    double raw_mean = 0.0; // meaningful only when count > 0
    double count = 0.0;
    double denoised = 0.0;
    double delta = 0.0; // denoised minus the count-weighted surface mean
};

struct Surface {
    Variable variable = Variable::idle_time;
    PeriodBin period = PeriodBin::weekday_peak;
    std::optional<FareMode> fare_mode; // empty for idle and reach time
    double lambda = 0.0;
    bool selected = false; // lambda chosen by the train/test split
    std::vector<SurfaceRow> rows;

    std::string key() const; // variable_period_mode
    std::string fare_mode_name() const;
};

/// Builds surface rows from a problem and its solution.
Surface make_surface(Variable v, PeriodBin p, std::optional<FareMode> mode, double lambda, const DenoiseProblem& problem,
                     std::span<const double> x);

/// One feature per surface row. Rows whose zone has no geometry get a null
/// geometry and `"geometry_missing": true`; the number of those is returned.
std::size_t emit_geojson(std::ostream& out, const Surface& s, const ZoneSet* zones);

struct GroupSummary {
    std::string group;
    std::size_t member_zones = 0; // group zones present in the surface
    double count = 0.0;
    std::optional<double> raw_mean; // empty when the group has no samples
    std::optional<double> denoised; // empty when the group has no member zones
};

/// Count-weighted means of the raw and denoised values per group. The
/// denoised mean falls back to an unweighted mean for members without
/// samples. Throws std::invalid_argument when `groups` is empty.
std::vector<GroupSummary> zone_group_summary(const Surface& s,
                                             const std::map<std::string, std::vector<ZoneId>>& groups);

class PipelineError : public std::runtime_error {
public:
    PipelineError(std::string stage, const std::string& message)
        : std::runtime_error("stage " + stage + ": " + message), stage_(std::move(stage))
    {
    }
    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

struct RunSummary {
    std::size_t input_rows = 0;
    std::size_t retained_trips = 0;
    Tally rejected; // across every stage, so input_rows = retained + total(rejected)
    std::size_t transitions = 0;
    std::size_t graph_nodes = 0;
    std::size_t graph_edges = 0;
    std::vector<Surface> surfaces;
    std::vector<std::string> warnings;
};

/// Runs ingest, metrics, graph construction, lambda selection and output.
/// Throws PipelineError naming the failing stage.
RunSummary run_pipeline(const RunConfig& cfg);

} // namespace ridegfl
