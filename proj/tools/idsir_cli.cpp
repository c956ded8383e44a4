#include <cmath>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "idsir/experiment.hpp"
#include "idsir/io.hpp"

using namespace idsir;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitNotConverged = 2;

struct Common {
    std::string scenario;
    std::string out = "out";
    std::optional<std::uint64_t> seed;
    std::optional<double> scale;
    std::optional<double> dt;
    std::optional<std::size_t> grid;
    std::optional<std::size_t> runs;
};

void add_common(CLI::App* cmd, Common& c, bool needs_scenario = true)
{
    if (needs_scenario) {
        cmd->add_option("scenario", c.scenario, "A1 ... D2 or a JSON config")->required();
    }
    cmd->add_option("--out", c.out, "output directory")->capture_default_str();
    cmd->add_option("--seed", c.seed, "base seed of the ABM ensemble");
    cmd->add_option("--scale", c.scale, "ABM desk mode: agents / scale, z0 * scale");
    cmd->add_option("--dt", c.dt, "time step of the deterministic model, days");
    cmd->add_option("--grid", c.grid, "number of grid points");
    cmd->add_option("--runs", c.runs, "ABM ensemble size");
}

ScenarioSpec resolve(const Common& c)
{
    ScenarioSpec spec = load_scenario(c.scenario);
    if (c.seed) {
        spec.abm.seed = *c.seed;
    }
    if (c.scale) {
        spec.abm.scale = *c.scale;
    }
    if (c.dt) {
        spec.problem.dt = *c.dt;
    }
    if (c.grid) {
        spec.problem.n_points = *c.grid;
    }
    if (c.runs) {
        spec.abm.runs = *c.runs;
    }
    spec.problem.ic = spec.initial_condition();
    spec.validate();
    return spec;
}

void warn_small_population(const ScenarioSpec& spec)
{
    const double expected = expected_initial_infected(spec.abm_config(), spec.abm_initial_condition());
    if (expected / static_cast<double>(spec.problem.n_points) < 1.0) {
        std::cerr << "warning: fewer than one expected initial infection per location ("
                  << expected << " in total)\n";
    }
}

int run_cmd(const Common& c, bool with_abm)
{
    const ScenarioSpec spec = resolve(c);
    if (with_abm) {
        warn_small_population(spec);
    }
    RunOptions options;
    options.run_abm = with_abm;
    options.log = &std::cerr;
    const ScenarioOutcome outcome = run_scenario(spec, c.out, options);
    std::cout << "Sim  | J(u=0)  | J(u*)_sir | J(u*)_abm\n" << summary_row(outcome) << '\n';
    std::cout << "status: " << to_string(outcome.sweep.status) << ", bundle: " << c.out << '\n';
    return outcome.sweep.converged() ? kExitOk : kExitNotConverged;
}

int forward_cmd(const Common& c, double u_value, const std::string& control_csv)
{
    const ScenarioSpec spec = resolve(c);
    const auto& p = spec.problem;
    const SpatialGrid grid(p.n_points);
    const KernelMatrix kernel(p.kernel, grid);
    const ControlField control = control_csv.empty()
        ? p.constant_control(u_value)
        : resample_control(read_control_csv(control_csv, p.n_points), p.dt, step_count(p.T, p.dt) + 1);
    const StateField state = integrate_forward(p.ic, control, p.params, kernel, p.T, p.dt);
    const std::filesystem::path out(c.out);
    write_field_csv(out / "z.csv", state.times, state.z);
    write_field_csv(out / "r.csv", state.times, state.r);
    write_control_csv(out / "control.csv", control);
    const CostBreakdown cost = cost_breakdown(state, control, p.costs, grid);
    std::cout << json{{"J", cost.total()},
                      {"infected", cost.infected},
                      {"control", cost.control},
                      {"capacity", cost.capacity},
                      {"max_z", state.z.maxCoeff()}}
                     .dump(2)
              << '\n';
    return kExitOk;
}

int abm_cmd(const Common& c, const std::string& control_csv)
{
    const ScenarioSpec spec = resolve(c);
    warn_small_population(spec);
    const ControlField control = control_csv.empty()
        ? spec.problem.constant_control(0.0)
        : read_control_csv(control_csv, spec.problem.n_points);
    const EnsembleSummary summary = simulate_abm(spec, control);
    const std::filesystem::path out(c.out);
    write_ensemble(summary, out);
    const json report = ensemble_report(summary, spec);
    write_json(out / "abm.json", report);
    std::cout << report.dump(2) << '\n';
    return kExitOk;
}

int equilibria_cmd(const Common& c)
{
    const ScenarioSpec spec = resolve(c);
    const auto& p = spec.problem;
    const SpatialGrid grid(p.n_points);
    const KernelMatrix kernel(p.kernel, grid);
    const SisEquilibrium sis = sis_fixed_point(kernel);
    const PrevalenceSolution prev = sir_prevalence(kernel, p.params);

    json report = diagnostics(spec);
    report["sis"] = {{"converged", sis.converged},     {"iterations", sis.iterations},
                     {"residual", sis.residual},       {"bounds_ok", sis.bounds_ok},
                     {"symmetric_ok", sis.symmetric_ok}, {"dichotomy_ok", sis.dichotomy_ok}};
    report["prevalence"] = {{"converged", prev.converged},
                            {"iterations", prev.iterations},
                            {"residual", prev.residual},
                            {"r_inf_mean", grid.integrate(prev.r_inf)}};
    const std::filesystem::path out(c.out);
    write_json(out / "equilibria.json", report);
    std::filesystem::create_directories(out);
    std::ofstream csv(out / "profiles.csv", std::ios::binary);
    csv << "x,z_star,r_inf\n";
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const auto k = static_cast<Eigen::Index>(i);
        csv << format_double(grid.node(i)) << ',' << format_double(sis.z_star[k]) << ','
            << format_double(prev.r_inf[k]) << '\n';
    }
    std::cout << report.dump(2) << '\n';
    return sis.converged && prev.converged ? kExitOk : kExitNotConverged;
}

int diagnostics_cmd(const Common& c)
{
    const json report = diagnostics(resolve(c));
    write_json(std::filesystem::path(c.out) / "norms.json", report);
    std::cout << report.dump(2) << '\n';
    return kExitOk;
}

int compare_cmd(const std::string& bundle)
{
    const BundleCheck check = recompute_bundle(bundle);
    const auto& s = check.stored;
    json report = {{"J_uncontrolled", {{"stored", s.at("J_uncontrolled")}, {"recomputed", check.j_uncontrolled}}},
                   {"J_sir", {{"stored", s.at("J_sir")}, {"recomputed", check.j_sir}}}};
    double worst = std::max(std::abs(s.at("J_uncontrolled").get<double>() - check.j_uncontrolled),
                            std::abs(s.at("J_sir").get<double>() - check.j_sir));
    if (check.j_abm && s.at("J_abm").is_number()) {
        report["J_abm"] = {{"stored", s.at("J_abm")}, {"recomputed", *check.j_abm}};
        worst = std::max(worst, std::abs(s.at("J_abm").get<double>() - *check.j_abm));
    }
    report["max_abs_difference"] = worst;
    std::cout << report.dump(2) << '\n';
    if (worst > 1e-10) {
        std::cerr << "error: stored and recomputed J differ by " << worst << '\n';
        return kExitError;
    }
    return kExitOk;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Integro-differential SIR model: optimal lockdown control, equilibria and ABM validation"};
    app.require_subcommand(1);

    Common run_opts, opt_opts, fwd_opts, abm_opts, eq_opts, diag_opts;
    double u_value = 0.0;
    std::string fwd_control, abm_control, bundle;

    auto* run = app.add_subcommand("run", "optimize, run ABM ensembles and write the full bundle");
    add_common(run, run_opts);
    auto* optimize = app.add_subcommand("optimize", "forward-backward sweep only, bundle without ABM");
    add_common(optimize, opt_opts);
    auto* forward = app.add_subcommand("forward", "single forward solve with a given control");
    add_common(forward, fwd_opts);
    forward->add_option("--u", u_value, "constant control value")->capture_default_str();
    forward->add_option("--control", fwd_control, "control CSV (overrides --u)");
    auto* abm = app.add_subcommand("abm", "ABM ensemble");
    add_common(abm, abm_opts);
    abm->add_option("--control", abm_control, "control CSV, default u = 0");
    auto* eq = app.add_subcommand("equilibria", "SIS fixed point and final-size prevalence");
    add_common(eq, eq_opts);
    auto* diag = app.add_subcommand("diagnostics", "kernel norms, R0 and regime labels");
    add_common(diag, diag_opts);
    auto* cmp = app.add_subcommand("compare", "recompute the J values of a bundle from its CSVs");
    cmp->add_option("bundle", bundle, "bundle directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitError;
    }

    try {
        if (*run) {
            return run_cmd(run_opts, true);
        }
        if (*optimize) {
            return run_cmd(opt_opts, false);
        }
        if (*forward) {
            return forward_cmd(fwd_opts, u_value, fwd_control);
        }
        if (*abm) {
            return abm_cmd(abm_opts, abm_control);
        }
        if (*eq) {
            return equilibria_cmd(eq_opts);
        }
        if (*diag) {
            return diagnostics_cmd(diag_opts);
        }
        if (*cmp) {
            return compare_cmd(bundle);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitError;
    }
    return kExitError;
}
