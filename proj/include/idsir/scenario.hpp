#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "idsir/abm.hpp"
#include "idsir/optimal_control.hpp"

namespace idsir {

enum class IcChoice { Uniform, Step, Explicit };

struct AbmSettings {
    std::size_t agents_per_location = 50000;
    double dt = 0.25;
    std::size_t runs = 10;
    std::uint64_t seed = 1;
    /// Desk mode: agents divided by scale, z0 multiplied by scale.
    double scale = 1.0;
    std::size_t threads = 0;
};

/// One experiment: the optimal-control problem plus sweep and ABM settings.
///
/// The initial condition is kept symbolically (`ic_choice` and its values)
/// and materialised on the grid by initial_condition(), so overriding
/// n_points stays consistent.
struct ScenarioSpec {
    std::string name = "custom";
    ControlProblem problem;
    SweepConfig sweep;
    AbmSettings abm;

    IcChoice ic_choice = IcChoice::Uniform;
    double z0_low = 2e-5;   ///< Uniform value, or Step value below z0_split
    double z0_high = 1e-4;  ///< Step value from z0_split on
    double z0_split = 0.9;
    std::vector<double> z0_values; ///< Explicit, one per cell
    std::vector<double> r0_values; ///< Explicit, empty means zero

    bool space_dependent_u() const { return problem.kind != ControlKind::TimeOnly; }
    bool piecewise_u() const { return problem.kind == ControlKind::PiecewiseConstant; }

    InitialCondition initial_condition() const;
    /// AbmConfig for this scenario with the desk-mode scale applied.
    AbmConfig abm_config() const;
    InitialCondition abm_initial_condition() const;
    /// Throws ConfigError naming the offending field.
    void validate() const;
};

/// Names of the built-in scenarios, A1 ... D2.
std::vector<std::string> scenario_names();

/// Built-in scenario by case-insensitive name; throws ConfigError if unknown.
ScenarioSpec builtin_scenario(const std::string& name);

/// A built-in name, or a path to a JSON file. JSON configs start from the
/// optional "base" scenario (default: A1 with name "custom") and override
/// the listed fields; unknown keys are errors.
ScenarioSpec load_scenario(const std::string& name_or_path);

/// Applies a JSON object of overrides; errors carry the JSON path.
void apply_overrides(ScenarioSpec& spec, const nlohmann::json& doc);

/// Fully resolved configuration, loadable again with load_scenario.
nlohmann::json to_json(const ScenarioSpec& spec);

ControlKind parse_control_kind(const std::string& text);

} // namespace idsir
