#include "idsir/experiment.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <ostream>

#include "idsir/io.hpp"

namespace idsir {

using nlohmann::json;

namespace {

double seconds_since(std::chrono::steady_clock::time_point start)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

void say(const RunOptions& options, const std::string& line)
{
    if (options.log != nullptr) {
        *options.log << line << std::endl;
    }
}

EnsembleSummary run_abm(const ScenarioSpec& spec, const ControlField& control,
                        const KernelMatrix& kernel, const std::optional<StateField>& reference)
{
    AbmConfig cfg = spec.abm_config();
    const std::size_t n_abm = cfg.steps() + 1;
    cfg.control = resample_control(control, cfg.dt, n_abm);
    const InitialCondition ic = spec.abm_initial_condition();

    EnsembleSummary out;
    out.ensemble = run_ensemble(cfg, ic, spec.abm.runs, spec.abm.seed, spec.abm.threads);

    // deterministic reference with the same (possibly scaled) initial state
    const StateField det = reference && spec.abm.scale == 1.0
        ? *reference
        : integrate_forward(ic, control, spec.problem.params, kernel, spec.problem.T, spec.problem.dt);
    out.comparison = compare(out.ensemble, det, kernel.grid());

    StateField mean;
    mean.times = out.ensemble.times;
    mean.z = out.ensemble.mean_z;
    mean.r = out.ensemble.mean_r;
    out.J = cost_functional(mean, *cfg.control, spec.problem.costs, kernel.grid());
    return out;
}

} // namespace

EnsembleSummary simulate_abm(const ScenarioSpec& spec, const ControlField& control)
{
    spec.validate();
    const KernelMatrix kernel(spec.problem.kernel, SpatialGrid(spec.problem.n_points));
    return run_abm(spec, control, kernel, std::nullopt);
}

json ensemble_report(const EnsembleSummary& s, const ScenarioSpec& spec)
{
    const auto& c = s.comparison;
    const double peak = c.det_mean.maxCoeff();
    const double gap = (c.det_mean - c.abm_mean).cwiseAbs().maxCoeff();
    return {{"J", s.J},
            {"runs", s.ensemble.runs.size()},
            {"agents_per_location", spec.abm_config().agents_per_location},
            {"scale", spec.abm.scale},
            {"mean_infectious_period", s.ensemble.mean_infectious_period()},
            {"sup_norm", c.sup_norm},
            {"l2_norm", c.l2_norm},
            {"det_mean_peak", peak},
            {"mean_curve_gap", gap},
            {"mean_curve_gap_rel", peak > 0.0 ? gap / peak : 0.0}};
}

void write_ensemble(const EnsembleSummary& s, const std::filesystem::path& dir)
{
    std::filesystem::create_directories(dir);
    for (const auto& run : s.ensemble.runs) {
        write_field_csv(dir / ("run_" + std::to_string(run.seed) + ".csv"), run.times, run.z_density);
    }
    write_field_csv(dir / "mean.csv", s.ensemble.times, s.ensemble.mean_z);
    write_field_csv(dir / "mean_r.csv", s.ensemble.times, s.ensemble.mean_r);
    write_field_csv(dir / "difference.csv", s.comparison.times, s.comparison.difference);
}


ControlField resample_control(const ControlField& control, double dt, std::size_t n_times)
{
    if (std::abs(dt - control.dt()) < 1e-12 && n_times == control.n_times()) {
        return control;
    }
    Matrix dense(static_cast<Eigen::Index>(n_times), static_cast<Eigen::Index>(control.n_cells()));
    for (std::size_t n = 0; n < n_times; ++n) {
        dense.row(static_cast<Eigen::Index>(n)) = control.slice_at_time(static_cast<double>(n) * dt).transpose();
    }
    if (control.kind() == ControlKind::TimeOnly) {
        return ControlField::time_only(dense.col(0), dt, control.n_cells());
    }
    return ControlField::space_time(std::move(dense), dt);
}

ScenarioOutcome run_scenario(const ScenarioSpec& spec, const std::filesystem::path& out_dir,
                             const RunOptions& options)
{
    try {
        spec.validate();
        ScenarioOutcome out;
        out.spec = spec;
        ControlProblem problem = spec.problem;
        problem.ic = spec.initial_condition();
        const SpatialGrid grid(problem.n_points);
        const KernelMatrix kernel(problem.kernel, grid);

        auto start = std::chrono::steady_clock::now();
        const ControlField zero = problem.constant_control(0.0);
        out.uncontrolled = integrate_forward(problem.ic, zero, problem.params, kernel, problem.T, problem.dt);
        out.j_uncontrolled = cost_functional(out.uncontrolled, zero, problem.costs, grid);
        say(options, spec.name + ": J(u=0) = " + format_double(out.j_uncontrolled));

        out.sweep = fbs_solve(problem, spec.sweep);
        out.j_sir = out.sweep.J();
        out.breakdown = cost_breakdown(out.sweep.state, out.sweep.control, problem.costs, grid);
        out.max_z = out.sweep.state.z.maxCoeff();
        out.seconds_optimize = seconds_since(start);
        say(options, spec.name + ": J(u*) = " + format_double(out.j_sir) + " after "
                + std::to_string(out.sweep.iterations) + " iterations ("
                + std::string(to_string(out.sweep.status)) + ")");

        if (options.run_abm) {
            start = std::chrono::steady_clock::now();
            out.abm = run_abm(spec, out.sweep.control, kernel, out.sweep.state);
            out.abm_uncontrolled = run_abm(spec, zero, kernel, out.uncontrolled);
            out.seconds_abm = seconds_since(start);
            say(options, spec.name + ": J(u*)_abm = " + format_double(out.abm->J));
        }
        if (!out_dir.empty()) {
            write_bundle(out, out_dir);
        }
        return out;
    } catch (const std::exception& e) {
        throw std::runtime_error("scenario " + spec.name + ": " + e.what());
    }
}

void write_bundle(const ScenarioOutcome& outcome, const std::filesystem::path& out_dir)
{
    std::filesystem::create_directories(out_dir);
    const auto& spec = outcome.spec;
    const auto& sweep = outcome.sweep;
    write_json(out_dir / "scenario.json", to_json(spec));
    write_field_csv(out_dir / "z.csv", sweep.state.times, sweep.state.z);
    write_field_csv(out_dir / "r.csv", sweep.state.times, sweep.state.r);
    write_control_csv(out_dir / "control.csv", sweep.control);
    write_field_csv(out_dir / "adjoint1.csv", sweep.state.times, sweep.adjoint.lambda1);
    write_field_csv(out_dir / "adjoint2.csv", sweep.state.times, sweep.adjoint.lambda2);
    write_iterations_csv(out_dir / "iterations.csv", sweep.j_log);
    write_field_csv(out_dir / "uncontrolled" / "z.csv", outcome.uncontrolled.times, outcome.uncontrolled.z);
    write_field_csv(out_dir / "uncontrolled" / "r.csv", outcome.uncontrolled.times, outcome.uncontrolled.r);

    json cmp;
    cmp["scenario"] = spec.name;
    cmp["J_uncontrolled"] = outcome.j_uncontrolled;
    cmp["J_sir"] = outcome.j_sir;
    cmp["J_abm"] = outcome.abm ? json(outcome.abm->J) : json(nullptr);
    cmp["cost_breakdown"] = {{"infected", outcome.breakdown.infected},
                             {"control", outcome.breakdown.control},
                             {"capacity", outcome.breakdown.capacity}};
    cmp["status"] = std::string(to_string(sweep.status));
    cmp["iterations"] = sweep.iterations;
    cmp["max_z"] = outcome.max_z;
    cmp["u_max"] = sweep.control.max();
    if (outcome.abm) {
        write_ensemble(*outcome.abm, out_dir / "abm");
        cmp["abm"] = ensemble_report(*outcome.abm, spec);
    }
    if (outcome.abm_uncontrolled) {
        write_ensemble(*outcome.abm_uncontrolled, out_dir / "abm_uncontrolled");
        cmp["abm_uncontrolled"] = ensemble_report(*outcome.abm_uncontrolled, spec);
    }
    write_json(out_dir / "compare.json", cmp);
    write_json(out_dir / "norms.json", diagnostics(spec));
}

BundleCheck recompute_bundle(const std::filesystem::path& bundle)
{
    BundleCheck out;
    out.stored = read_json(bundle / "compare.json");
    const ScenarioSpec spec = load_scenario((bundle / "scenario.json").string());
    const SpatialGrid grid(spec.problem.n_points);
    const CostParams& costs = spec.problem.costs;

    const StateField state = read_state(bundle / "z.csv", bundle / "r.csv");
    const ControlField control = read_control_csv(bundle / "control.csv", spec.problem.n_points);
    out.j_sir = cost_functional(state, control, costs, grid);

    const StateField free_run = read_state(bundle / "uncontrolled" / "z.csv", bundle / "uncontrolled" / "r.csv");
    const ControlField zero = ControlField::constant(control.kind() == ControlKind::TimeOnly
                                                         ? ControlKind::TimeOnly
                                                         : ControlKind::SpaceTime,
                                                     0.0, control.dt(), control.n_times(), control.n_cells());
    out.j_uncontrolled = cost_functional(free_run, zero, costs, grid);

    if (std::filesystem::exists(bundle / "abm" / "mean.csv")) {
        const StateField mean = read_state(bundle / "abm" / "mean.csv", bundle / "abm" / "mean_r.csv");
        const ControlField u = resample_control(control, mean.dt(), mean.n_times());
        out.j_abm = cost_functional(mean, u, costs, grid);
    }
    return out;
}

json diagnostics(const ScenarioSpec& spec)
{
    const SpatialGrid grid(spec.problem.n_points);
    const ThresholdReport t = threshold_report(spec.problem.kernel, spec.problem.params, grid);
    const ValidationReport v = validate_assumptions(spec.problem.kernel, grid);
    json checks = json::object();
    for (const auto& c : v.checks) {
        checks[c.name] = {{"passed", c.passed}, {"detail", c.detail}};
    }
    return {{"k1", t.k1},
            {"K", t.K},
            {"op_norm", t.op_norm},
            {"R0", t.r0},
            {"contraction_constant", t.contraction_constant},
            {"contraction_regime", t.contraction_regime},
            {"schauder_existence", t.schauder_existence},
            {"regime", t.regime},
            {"assumptions", checks}};
}

std::string summary_row(const ScenarioOutcome& outcome)
{
    char buf[128];
    const double abm = outcome.abm ? outcome.abm->J : std::numeric_limits<double>::quiet_NaN();
    std::snprintf(buf, sizeof buf, "%-4s | %7.1f | %7.1f | %7.1f", outcome.spec.name.c_str(),
                  outcome.j_uncontrolled, outcome.j_sir, abm);
    return buf;
}

void write_json(const std::filesystem::path& path, const json& doc)
{
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw ConfigError("cannot write " + path.string());
    }
    out << doc.dump(2) << '\n';
}

json read_json(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot read " + path.string());
    }
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

} // namespace idsir
