#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include <json.hpp>

#include "idsir/abm.hpp"
#include "idsir/equilibria.hpp"
#include "idsir/optimal_control.hpp"
#include "idsir/scenario.hpp"

namespace idsir {

struct RunOptions {
    bool run_abm = true;
    std::ostream* log = nullptr; ///< progress lines, optional
};

struct EnsembleSummary {
    EnsembleResult ensemble;
    ComparisonReport comparison;
    double J = 0.0; ///< J evaluated on the ensemble-mean densities
};

struct ScenarioOutcome {
    ScenarioSpec spec;
    SweepResult sweep;
    StateField uncontrolled;
    double j_uncontrolled = 0.0;
    double j_sir = 0.0;
    CostBreakdown breakdown;
    double max_z = 0.0;
    std::optional<EnsembleSummary> abm;              ///< under u*
    std::optional<EnsembleSummary> abm_uncontrolled; ///< under u = 0
    double seconds_optimize = 0.0;
    double seconds_abm = 0.0;
};

/// Control on another time grid, sampled with the value in force at each
/// node (same kind for TimeOnly, SpaceTime otherwise).
ControlField resample_control(const ControlField& control, double dt, std::size_t n_times);

/// ABM ensemble of the scenario under `control` (any time grid), compared
/// with the deterministic run from the same, possibly desk-scaled, state.
EnsembleSummary simulate_abm(const ScenarioSpec& spec, const ControlField& control);

/// compare.json fragment: J, period, norms and the mean-curve gap.
nlohmann::json ensemble_report(const EnsembleSummary& summary, const ScenarioSpec& spec);

/// Writes run_<seed>.csv, mean.csv, mean_r.csv and difference.csv.
void write_ensemble(const EnsembleSummary& summary, const std::filesystem::path& dir);

/// Optimizes, evaluates J(u = 0) and J(u*), runs the ABM ensembles and, when
/// out_dir is non-empty, writes the bundle. Errors are rethrown with the
/// scenario name prepended.
ScenarioOutcome run_scenario(const ScenarioSpec& spec, const std::filesystem::path& out_dir,
                             const RunOptions& options = {});

/// Writes scenario.json, z/r/control/adjoint CSVs, iterations.csv, the
/// uncontrolled run, abm ensembles, compare.json and norms.json.
void write_bundle(const ScenarioOutcome& outcome, const std::filesystem::path& out_dir);

/// The J values of compare.json recomputed from the bundle's CSV files.
struct BundleCheck {
    double j_uncontrolled = 0.0;
    double j_sir = 0.0;
    std::optional<double> j_abm;
    nlohmann::json stored;
};
BundleCheck recompute_bundle(const std::filesystem::path& bundle);

/// Kernel diagnostics and regime labels.
nlohmann::json diagnostics(const ScenarioSpec& spec);

/// "A1 | 132.4 | 31.9 | 29.5" style summary line.
std::string summary_row(const ScenarioOutcome& outcome);

void write_json(const std::filesystem::path& path, const nlohmann::json& doc);
nlohmann::json read_json(const std::filesystem::path& path);

} // namespace idsir
