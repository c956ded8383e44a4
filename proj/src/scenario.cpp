#include "idsir/scenario.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

namespace idsir {

using nlohmann::json;

namespace {

std::string upper(std::string s)
{
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    return s;
}

std::string lower(std::string s)
{
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

// Typed field access that reports the JSON path on failure.
class Reader {
public:
    Reader(const json& obj, std::string path) : obj_(obj), path_(std::move(path))
    {
        if (!obj_.is_object()) {
            throw ConfigError(path_ + ": expected an object");
        }
    }

    template <class T>
    void get(const char* key, T& target)
    {
        seen_.push_back(key);
        auto it = obj_.find(key);
        if (it == obj_.end()) {
            return;
        }
        try {
            if constexpr (std::is_same_v<T, double>) {
                if (!it->is_number()) {
                    throw ConfigError("expected a number");
                }
            } else if constexpr (std::is_integral_v<T>) {
                if (!it->is_number_integer() || (it->is_number_integer() && it->template get<long long>() < 0)) {
                    throw ConfigError("expected a non-negative integer");
                }
            }
            target = it->template get<T>();
        } catch (const std::exception& e) {
            throw ConfigError(field(key) + ": " + e.what());
        }
    }

    const json* child(const char* key)
    {
        seen_.push_back(key);
        auto it = obj_.find(key);
        return it == obj_.end() ? nullptr : &*it;
    }

    std::string field(const char* key) const { return path_ + "." + key; }

    void finish() const
    {
        for (auto it = obj_.begin(); it != obj_.end(); ++it) {
            if (std::find(seen_.begin(), seen_.end(), it.key()) == seen_.end()) {
                throw ConfigError(path_ + "." + it.key() + ": unknown field");
            }
        }
    }

private:
    const json& obj_;
    std::string path_;
    std::vector<std::string> seen_;
};

std::vector<double> read_profile(const json& value, const std::string& path)
{
    if (!value.is_array()) {
        throw ConfigError(path + ": expected an array of numbers");
    }
    std::vector<double> out;
    for (std::size_t i = 0; i < value.size(); ++i) {
        if (!value[i].is_number()) {
            throw ConfigError(path + "[" + std::to_string(i) + "]: expected a number");
        }
        out.push_back(value[i].get<double>());
    }
    return out;
}

void read_ic(ScenarioSpec& spec, const json& value, const std::string& path)
{
    if (value.is_string()) {
        const std::string choice = lower(value.get<std::string>());
        if (choice == "z0_1") {
            spec.ic_choice = IcChoice::Uniform;
            spec.z0_low = 2e-5;
        } else if (choice == "z0_2") {
            spec.ic_choice = IcChoice::Step;
            spec.z0_low = 1e-5;
            spec.z0_high = 1e-4;
            spec.z0_split = 0.9;
        } else {
            throw ConfigError(path + ": unknown initial condition '" + value.get<std::string>() + "'");
        }
        return;
    }
    Reader r(value, path);
    std::string type;
    r.get("type", type);
    if (type.empty() || type == "uniform") {
        spec.ic_choice = IcChoice::Uniform;
    } else if (type == "step") {
        spec.ic_choice = IcChoice::Step;
    } else if (type == "explicit") {
        spec.ic_choice = IcChoice::Explicit;
    } else {
        throw ConfigError(r.field("type") + ": expected uniform, step or explicit");
    }
    if (spec.ic_choice == IcChoice::Explicit) {
        const json* z0 = r.child("z0");
        if (z0 == nullptr) {
            throw ConfigError(r.field("z0") + ": required for explicit initial conditions");
        }
        spec.z0_values = read_profile(*z0, r.field("z0"));
        spec.r0_values.clear();
        if (const json* r0 = r.child("r0")) {
            spec.r0_values = read_profile(*r0, r.field("r0"));
        }
    } else {
        if (spec.ic_choice == IcChoice::Uniform) {
            r.get("z0", spec.z0_low);
        } else {
            r.get("low", spec.z0_low);
            r.get("high", spec.z0_high);
            r.get("split", spec.z0_split);
        }
    }
    r.finish();
}

json ic_to_json(const ScenarioSpec& spec)
{
    switch (spec.ic_choice) {
    case IcChoice::Uniform:
        return {{"type", "uniform"}, {"z0", spec.z0_low}};
    case IcChoice::Step:
        return {{"type", "step"}, {"low", spec.z0_low}, {"high", spec.z0_high}, {"split", spec.z0_split}};
    case IcChoice::Explicit:
        break;
    }
    json out = {{"type", "explicit"}, {"z0", spec.z0_values}};
    if (!spec.r0_values.empty()) {
        out["r0"] = spec.r0_values;
    }
    return out;
}

std::string kind_name(ControlKind kind)
{
    switch (kind) {
    case ControlKind::TimeOnly:
        return "time_only";
    case ControlKind::SpaceTime:
        return "space_time";
    case ControlKind::PiecewiseConstant:
        return "piecewise";
    }
    return "time_only";
}

} // namespace

ControlKind parse_control_kind(const std::string& text)
{
    const std::string t = lower(text);
    if (t == "time_only" || t == "time") {
        return ControlKind::TimeOnly;
    }
    if (t == "space_time" || t == "spacetime") {
        return ControlKind::SpaceTime;
    }
    if (t == "piecewise" || t == "piecewise_constant") {
        return ControlKind::PiecewiseConstant;
    }
    throw ConfigError("unknown control kind '" + text + "' (time_only, space_time, piecewise)");
}

InitialCondition ScenarioSpec::initial_condition() const
{
    const SpatialGrid grid(problem.n_points);
    switch (ic_choice) {
    case IcChoice::Uniform:
        return InitialCondition::uniform(problem.n_points, z0_low);
    case IcChoice::Step:
        return InitialCondition::step(grid, z0_low, z0_high, z0_split);
    case IcChoice::Explicit:
        break;
    }
    if (z0_values.size() != problem.n_points
        || (!r0_values.empty() && r0_values.size() != problem.n_points)) {
        throw ConfigError("ic: explicit profiles must have n_points = "
                          + std::to_string(problem.n_points) + " entries");
    }
    InitialCondition ic;
    ic.z0 = Eigen::Map<const Vector>(z0_values.data(), static_cast<Eigen::Index>(z0_values.size()));
    ic.r0 = r0_values.empty()
        ? Vector::Zero(ic.z0.size())
        : Vector(Eigen::Map<const Vector>(r0_values.data(), static_cast<Eigen::Index>(r0_values.size())));
    return ic;
}

InitialCondition ScenarioSpec::abm_initial_condition() const
{
    InitialCondition ic = initial_condition();
    ic.z0 *= abm.scale;
    ic.validate(problem.n_points);
    return ic;
}

AbmConfig ScenarioSpec::abm_config() const
{
    AbmConfig cfg;
    cfg.n_locations = problem.n_points;
    cfg.agents_per_location = static_cast<std::size_t>(
        std::llround(static_cast<double>(abm.agents_per_location) / abm.scale));
    cfg.beta = problem.params.beta;
    cfg.gamma = problem.params.gamma;
    cfg.kernel = problem.kernel;
    cfg.dt = abm.dt;
    cfg.T = problem.T;
    cfg.seed = abm.seed;
    return cfg;
}

void ScenarioSpec::validate() const
{
    auto wrap = [&](const char* field, auto&& check) {
        try {
            check();
        } catch (const std::exception& e) {
            throw ConfigError(name + ": " + field + ": " + e.what());
        }
    };
    wrap("params", [&] { problem.params.validate(); });
    wrap("costs", [&] { problem.costs.validate(); });
    wrap("sweep", [&] { sweep.validate(); });
    wrap("kernel", [&] {
        if (problem.kernel.c < 0.0 || problem.kernel.delta < 0.0 || problem.kernel.k0 < 0.0) {
            throw DomainError("c, delta and k0 must be non-negative");
        }
    });
    wrap("n_points", [&] {
        if (problem.n_points < 2) {
            throw DomainError("need at least two grid points");
        }
    });
    wrap("T", [&] { static_cast<void>(step_count(problem.T, problem.dt)); });
    wrap("ic", [&] { initial_condition().validate(problem.n_points); });
    wrap("blocks", [&] {
        if (piecewise_u()) {
            static_cast<void>(problem.steps_per_block());
            if (problem.space_block == 0 || problem.n_points % problem.space_block != 0) {
                throw DomainError("cells per block must divide n_points");
            }
        }
    });
    wrap("abm", [&] {
        if (!(abm.scale >= 1.0) || abm.runs == 0) {
            throw DomainError("scale must be >= 1 and runs positive");
        }
        abm_config().validate();
        static_cast<void>(step_count(problem.T, abm.dt));
    });
}

std::vector<std::string> scenario_names()
{
    return {"A1", "A2", "B1", "B2", "C1", "C2", "D1", "D2"};
}

ScenarioSpec builtin_scenario(const std::string& name)
{
    const std::string key = upper(name);
    const auto names = scenario_names();
    if (std::find(names.begin(), names.end(), key) == names.end()) {
        throw ConfigError("unknown scenario '" + name + "' (known: A1 ... D2)");
    }
    ScenarioSpec spec;
    spec.name = key;
    switch (key[0]) {
    case 'A':
        spec.problem.kind = ControlKind::TimeOnly;
        break;
    case 'B':
        spec.problem.kind = ControlKind::TimeOnly;
        break;
    case 'C':
        spec.problem.kind = ControlKind::SpaceTime;
        break;
    default:
        spec.problem.kind = ControlKind::PiecewiseConstant;
        break;
    }
    if (key[0] == 'A') {
        read_ic(spec, "z0_1", "ic");
    } else {
        read_ic(spec, "z0_2", "ic");
    }
    if (key[1] == '1') {
        spec.problem.T = 400.0;
        spec.problem.costs.eta = 0.02;
        spec.problem.costs.omega = 1.0;
    } else {
        spec.problem.T = 800.0;
        spec.problem.costs.eta = 0.005;
        spec.problem.costs.omega = 0.2;
    }
    spec.problem.time_block = 10.0;
    spec.problem.space_block = 10;
    spec.problem.ic = spec.initial_condition();
    return spec;
}

void apply_overrides(ScenarioSpec& spec, const json& doc)
{
    Reader r(doc, "$");
    std::string base;
    r.get("base", base);
    r.get("name", spec.name);

    std::string control;
    r.get("control", control);
    if (!control.empty()) {
        try {
            spec.problem.kind = parse_control_kind(control);
        } catch (const ConfigError& e) {
            throw ConfigError(r.field("control") + ": " + e.what());
        }
    }
    r.get("T", spec.problem.T);
    r.get("dt", spec.problem.dt);
    r.get("n_points", spec.problem.n_points);
    r.get("eta", spec.problem.costs.eta);
    r.get("omega", spec.problem.costs.omega);
    if (const json* ic = r.child("ic")) {
        read_ic(spec, *ic, "$.ic");
    }
    if (const json* p = r.child("params")) {
        Reader c(*p, "$.params");
        c.get("beta", spec.problem.params.beta);
        c.get("gamma", spec.problem.params.gamma);
        c.finish();
    }
    if (const json* p = r.child("kernel")) {
        Reader c(*p, "$.kernel");
        c.get("c", spec.problem.kernel.c);
        c.get("delta", spec.problem.kernel.delta);
        c.get("k0", spec.problem.kernel.k0);
        c.finish();
    }
    if (const json* p = r.child("costs")) {
        Reader c(*p, "$.costs");
        c.get("eta", spec.problem.costs.eta);
        c.get("omega", spec.problem.costs.omega);
        c.get("c1", spec.problem.costs.c1);
        c.get("c2", spec.problem.costs.c2);
        c.get("z_min", spec.problem.costs.z_min);
        c.get("z_max", spec.problem.costs.z_max);
        c.get("psi_slope", spec.problem.costs.psi_slope);
        c.finish();
    }
    if (const json* p = r.child("sweep")) {
        Reader c(*p, "$.sweep");
        c.get("sigma", spec.sweep.sigma);
        c.get("tol", spec.sweep.tol);
        c.get("max_iter", spec.sweep.max_iter);
        c.get("u_init", spec.sweep.u_init);
        c.get("sigma_min", spec.sweep.sigma_min);
        c.finish();
    }
    if (const json* p = r.child("blocks")) {
        Reader c(*p, "$.blocks");
        c.get("days", spec.problem.time_block);
        c.get("cells", spec.problem.space_block);
        c.finish();
    }
    if (const json* p = r.child("abm")) {
        Reader c(*p, "$.abm");
        c.get("agents_per_location", spec.abm.agents_per_location);
        c.get("dt", spec.abm.dt);
        c.get("runs", spec.abm.runs);
        c.get("seed", spec.abm.seed);
        c.get("scale", spec.abm.scale);
        c.get("threads", spec.abm.threads);
        c.finish();
    }
    r.finish();
    spec.problem.ic = spec.initial_condition();
}

ScenarioSpec load_scenario(const std::string& name_or_path)
{
    const std::string key = upper(name_or_path);
    const auto names = scenario_names();
    if (std::find(names.begin(), names.end(), key) != names.end()) {
        return builtin_scenario(key);
    }

    const std::filesystem::path path(name_or_path);
    if (!std::filesystem::is_regular_file(path)) {
        throw ConfigError("unknown scenario '" + name_or_path + "': not a built-in name or a file");
    }
    std::ifstream in(path);
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    if (!doc.is_object()) {
        throw ConfigError(path.string() + ": $: expected an object");
    }
    ScenarioSpec spec = builtin_scenario(doc.contains("base") && doc["base"].is_string()
                                             ? doc["base"].get<std::string>()
                                             : "A1");
    if (!doc.contains("base")) {
        spec.name = "custom";
    }
    try {
        apply_overrides(spec, doc);
        spec.validate();
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    return spec;
}

json to_json(const ScenarioSpec& spec)
{
    const auto& p = spec.problem;
    json out;
    out["name"] = spec.name;
    out["control"] = kind_name(p.kind);
    out["T"] = p.T;
    out["dt"] = p.dt;
    out["n_points"] = p.n_points;
    out["ic"] = ic_to_json(spec);
    out["params"] = {{"beta", p.params.beta}, {"gamma", p.params.gamma}};
    out["kernel"] = {{"c", p.kernel.c}, {"delta", p.kernel.delta}, {"k0", p.kernel.k0}};
    out["costs"] = {{"eta", p.costs.eta},     {"omega", p.costs.omega}, {"c1", p.costs.c1},
                    {"c2", p.costs.c2},       {"z_min", p.costs.z_min}, {"z_max", p.costs.z_max},
                    {"psi_slope", p.costs.psi_slope}};
    out["sweep"] = {{"sigma", spec.sweep.sigma},       {"tol", spec.sweep.tol},
                    {"max_iter", spec.sweep.max_iter}, {"u_init", spec.sweep.u_init},
                    {"sigma_min", spec.sweep.sigma_min}};
    out["blocks"] = {{"days", p.time_block}, {"cells", p.space_block}};
    out["abm"] = {{"agents_per_location", spec.abm.agents_per_location},
                  {"dt", spec.abm.dt},
                  {"runs", spec.abm.runs},
                  {"seed", spec.abm.seed},
                  {"scale", spec.abm.scale},
                  {"threads", spec.abm.threads}};
    return out;
}

} // namespace idsir
