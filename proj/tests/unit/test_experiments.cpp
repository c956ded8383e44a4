#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "idsir/experiment.hpp"
#include "idsir/io.hpp"

using namespace idsir;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name)
{
    const fs::path dir = fs::temp_directory_path() / ("idsir_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

// A problem small enough to optimize and simulate in about a second.
ScenarioSpec tiny(ControlKind kind = ControlKind::TimeOnly)
{
    ScenarioSpec spec = builtin_scenario("A1");
    apply_overrides(spec, nlohmann::json::parse(R"({
        "name": "tiny", "T": 40, "dt": 0.5, "n_points": 10,
        "ic": {"type": "step", "low": 0.001, "high": 0.004, "split": 0.7},
        "sweep": {"max_iter": 15},
        "blocks": {"days": 10, "cells": 5},
        "abm": {"agents_per_location": 400, "runs": 3, "seed": 11, "dt": 0.5}
    })"));
    spec.problem.kind = kind;
    spec.validate();
    return spec;
}

} // namespace

TEST_CASE("built-in scenarios")
{
    CHECK(scenario_names().size() == 8);
    const ScenarioSpec a1 = load_scenario("A1");
    CHECK(a1.problem.kind == ControlKind::TimeOnly);
    CHECK(a1.problem.T == 400.0);
    CHECK(a1.problem.costs.eta == 0.02);
    CHECK(a1.problem.costs.omega == 1.0);
    CHECK(a1.problem.ic.z0.isApprox(Vector::Constant(100, 2e-5)));
    CHECK(a1.problem.kernel.c == 50.0);
    CHECK(a1.problem.kernel.delta == 50.0);
    CHECK(a1.problem.kernel.k0 == 0.0);

    const ScenarioSpec d2 = load_scenario("d2");
    CHECK(d2.name == "D2");
    CHECK(d2.problem.kind == ControlKind::PiecewiseConstant);
    CHECK(d2.problem.T == 800.0);
    CHECK(d2.problem.costs.eta == 0.005);
    CHECK(d2.problem.costs.omega == 0.2);
    CHECK(d2.problem.time_block == 10.0);
    CHECK(d2.problem.space_block == 10);
    CHECK(d2.problem.ic.z0[89] == 1e-5);
    CHECK(d2.problem.ic.z0[90] == 1e-4);

    CHECK(load_scenario("C1").problem.kind == ControlKind::SpaceTime);
    CHECK(load_scenario("b2").problem.ic.z0[95] == 1e-4);
    for (const auto& name : scenario_names()) {
        CHECK_NOTHROW(builtin_scenario(name).validate());
    }
    CHECK_THROWS_AS(load_scenario("E9"), ConfigError);
}

TEST_CASE("JSON overrides and error paths")
{
    const fs::path dir = scratch("json");
    {
        std::ofstream(dir / "eta.json") << R"({"base": "B1", "costs": {"eta": 0.01}})";
    }
    const ScenarioSpec s = load_scenario((dir / "eta.json").string());
    CHECK(s.name == "B1");
    CHECK(s.problem.costs.eta == 0.01);
    CHECK(s.problem.costs.omega == 1.0);

    {
        std::ofstream(dir / "plain.json") << R"({"T": 100})";
    }
    CHECK(load_scenario((dir / "plain.json").string()).name == "custom");

    auto message_of = [&](const std::string& text) -> std::string {
        std::ofstream(dir / "bad.json") << text;
        try {
            load_scenario((dir / "bad.json").string());
        } catch (const ConfigError& e) {
            return e.what();
        }
        return "";
    };
    CHECK(message_of(R"({"kernel": {"foo": 1}})").find("$.kernel.foo") != std::string::npos);
    CHECK(message_of(R"({"bogus": true})").find("$.bogus") != std::string::npos);
    CHECK(message_of(R"({"costs": {"eta": "x"}})").find("$.costs.eta") != std::string::npos);
    CHECK(message_of(R"({"control": "sideways"})").find("$.control") != std::string::npos);
    CHECK(message_of(R"({"costs": {"eta": -1}})").find("costs") != std::string::npos);
    CHECK(message_of(R"({"dt": 0.3})").find("T") != std::string::npos);
    CHECK(message_of("{not json").find("bad.json") != std::string::npos);
    CHECK_FALSE(message_of(R"({"ic": "z0_3"})").empty());
}

TEST_CASE("resolved configuration round trip")
{
    const fs::path dir = scratch("roundtrip");
    for (const auto& name : {"A1", "C2", "D1"}) {
        const ScenarioSpec spec = builtin_scenario(name);
        write_json(dir / "spec.json", to_json(spec));
        const ScenarioSpec back = load_scenario((dir / "spec.json").string());
        CHECK(to_json(back) == to_json(spec));
        CHECK(back.problem.ic.z0 == spec.problem.ic.z0);
    }
}

TEST_CASE("CSV round trip is exact")
{
    const fs::path dir = scratch("csv");
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Matrix values(7, 4);
    for (Eigen::Index i = 0; i < values.size(); ++i) {
        values.data()[i] = unit(rng) * std::pow(10.0, -static_cast<double>(i % 9));
    }
    const Vector times = Vector::LinSpaced(7, 0.0, 1.5);
    write_field_csv(dir / "f.csv", times, values);
    const FieldTable t = read_field_csv(dir / "f.csv");
    CHECK(t.times == times);
    CHECK(t.values == values);
    CHECK(t.header.front() == "t");
    CHECK(t.header.size() == 5);

    write_iterations_csv(dir / "it.csv", {3.0, 2.5, 1.0 / 3.0});
    CHECK(read_iterations_csv(dir / "it.csv") == std::vector<double>{3.0, 2.5, 1.0 / 3.0});

    const ControlField u = ControlField::time_only(Vector::LinSpaced(7, 0.0, 1.0 / 7.0), 0.25, 4);
    write_control_csv(dir / "u.csv", u);
    const ControlField back = read_control_csv(dir / "u.csv", 4);
    CHECK(back.kind() == ControlKind::TimeOnly);
    CHECK(back.dofs() == u.dofs());

    const ControlField st = ControlField::space_time(values.cwiseMin(1.0), 0.25);
    write_control_csv(dir / "st.csv", st);
    CHECK(read_control_csv(dir / "st.csv", 4).dense() == st.dense());

    {
        std::ofstream(dir / "broken.csv") << "t,x_0\n0,0.1\n0.25,abc\n";
    }
    try {
        read_field_csv(dir / "broken.csv");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("broken.csv:3") != std::string::npos);
    }
    {
        std::ofstream(dir / "ragged.csv") << "t,x_0,x_1\n0,0.1\n";
    }
    CHECK_THROWS_AS(read_field_csv(dir / "ragged.csv"), ConfigError);
    CHECK_THROWS_AS(read_field_csv(dir / "missing.csv"), ConfigError);
}

TEST_CASE("control resampling")
{
    const ControlField u = ControlField::time_only(Vector::LinSpaced(5, 0.0, 0.4), 1.0, 3);
    const ControlField fine = resample_control(u, 0.5, 9);
    CHECK(fine.kind() == ControlKind::TimeOnly);
    CHECK(fine.at(0, 0) == 0.0);
    CHECK(fine.at(1, 0) == doctest::Approx(0.0));
    CHECK(fine.at(2, 0) == doctest::Approx(0.1));
    CHECK(fine.at(3, 2) == doctest::Approx(0.1));
    CHECK(fine.at(8, 1) == doctest::Approx(0.4));

    Matrix blocks(2, 1);
    blocks << 0.2, 0.6;
    const ControlField p = ControlField::piecewise(blocks, 1.0, 2, 3, 5, 3);
    const ControlField dense = resample_control(p, 0.5, 9);
    CHECK(dense.kind() == ControlKind::SpaceTime);
    CHECK(dense.at(3, 1) == doctest::Approx(0.2));
    CHECK(dense.at(4, 1) == doctest::Approx(0.6));
}

TEST_CASE("diagnostics")
{
    const nlohmann::json a1 = diagnostics(builtin_scenario("A1"));
    CHECK(a1["R0"].get<double>() == doctest::Approx(2.0).epsilon(0.01));
    CHECK_FALSE(a1["contraction_regime"].get<bool>());
    CHECK(a1["op_norm"].get<double>() <= a1["K"].get<double>());

    ScenarioSpec flat = builtin_scenario("A1");
    flat.problem.kernel = KernelSpec::constant(2.0);
    const nlohmann::json f = diagnostics(flat);
    CHECK(f["contraction_constant"].get<double>() == doctest::Approx(0.5));
    CHECK(f["contraction_regime"].get<bool>());

    flat.problem.kernel = KernelSpec::constant(0.5);
    CHECK(diagnostics(flat)["regime"] == "disease-free only");
}

TEST_CASE("scenario run, bundle and recomputation")
{
    const fs::path first = scratch("bundle1");
    const fs::path second = scratch("bundle2");
    const ScenarioSpec spec = tiny();
    const ScenarioOutcome out = run_scenario(spec, first);
    run_scenario(spec, second);

    CHECK(out.j_sir <= out.j_uncontrolled);
    CHECK(out.sweep.j_log.size() == out.sweep.iterations + 1);
    REQUIRE(out.abm.has_value());
    REQUIRE(out.abm_uncontrolled.has_value());
    CHECK(out.abm->ensemble.runs.size() == 3);
    CHECK(out.abm->ensemble.runs.front().seed == 11);

    for (const char* f : {"scenario.json", "z.csv", "r.csv", "control.csv", "adjoint1.csv", "adjoint2.csv",
                          "iterations.csv", "uncontrolled/z.csv", "uncontrolled/r.csv", "abm/mean.csv",
                          "abm/mean_r.csv", "abm/difference.csv", "abm/run_12.csv",
                          "abm_uncontrolled/mean.csv", "compare.json", "norms.json"}) {
        INFO(f);
        CHECK(fs::is_regular_file(first / f));
    }
    // identical inputs give byte-identical data files
    for (const char* f : {"z.csv", "control.csv", "adjoint1.csv", "iterations.csv", "abm/mean.csv",
                          "abm/run_13.csv", "norms.json", "scenario.json"}) {
        INFO(f);
        CHECK(slurp(first / f) == slurp(second / f));
    }

    const BundleCheck check = recompute_bundle(first);
    CHECK(std::abs(check.j_uncontrolled - check.stored["J_uncontrolled"].get<double>()) <= 1e-10);
    CHECK(std::abs(check.j_sir - check.stored["J_sir"].get<double>()) <= 1e-10);
    REQUIRE(check.j_abm.has_value());
    CHECK(std::abs(*check.j_abm - check.stored["J_abm"].get<double>()) <= 1e-10);
    CHECK(check.j_sir == doctest::Approx(out.j_sir).epsilon(1e-12));

    // the bundle's configuration reproduces the scenario
    const ScenarioSpec again = load_scenario((first / "scenario.json").string());
    CHECK(to_json(again) == to_json(spec));
    CHECK_FALSE(summary_row(out).empty());
}

TEST_CASE("piecewise and space-time scenarios run without an ABM")
{
    RunOptions opts;
    opts.run_abm = false;
    for (ControlKind kind : {ControlKind::SpaceTime, ControlKind::PiecewiseConstant}) {
        const ScenarioOutcome out = run_scenario(tiny(kind), {}, opts);
        CHECK_FALSE(out.abm.has_value());
        CHECK(out.sweep.control.kind() == kind);
        CHECK(out.j_sir <= out.sweep.j_log.front());
    }
}

TEST_CASE("no infection, no control")
{
    ScenarioSpec spec = tiny();
    apply_overrides(spec, nlohmann::json::parse(R"({"ic": {"type": "uniform", "z0": 0}, "sweep": {"u_init": 0}})"));
    RunOptions opts;
    opts.run_abm = false;
    const ScenarioOutcome out = run_scenario(spec, {}, opts);
    CHECK(out.sweep.state.z.isZero(0.0));
    CHECK(out.sweep.control.max() < 1e-12);
    // only the constant capacity term psi(-z_max) remains
    CHECK(out.breakdown.infected == 0.0);
    const double capacity = 0.5 * 1.0 * (1.0 + std::tanh(-1000.0 * 5e-3)) * 40.0;
    CHECK(out.j_sir == doctest::Approx(capacity).epsilon(1e-12));
}

TEST_CASE("scenario errors carry the name")
{
    ScenarioSpec spec = tiny();
    spec.problem.dt = 0.3;
    try {
        run_scenario(spec, {});
        FAIL("expected an error");
    } catch (const std::exception& e) {
        CHECK(std::string(e.what()).find("tiny") != std::string::npos);
    }
}
