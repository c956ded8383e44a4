#include "idsir/abm.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <random>
#include <string>
#include <thread>

namespace idsir {

namespace {

std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t kPurposeInit = 0;
constexpr std::uint64_t kPurposeStep = 1;

// Ascending positions in [0, count) of independent Bernoulli(p) successes,
// found by geometric skipping.
void bernoulli_select(std::size_t count, double p, std::mt19937_64& rng,
                      std::vector<std::size_t>& selected)
{
    selected.clear();
    if (count == 0 || !(p > 0.0)) {
        return;
    }
    if (p >= 1.0) {
        for (std::size_t i = 0; i < count; ++i) {
            selected.push_back(i);
        }
        return;
    }
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double log_q = std::log1p(-p);
    std::size_t pos = 0;
    while (pos < count) {
        const double u = 1.0 - unit(rng); // (0, 1]
        const double skip = std::floor(std::log(u) / log_q);
        if (skip >= static_cast<double>(count - pos)) {
            break;
        }
        pos += static_cast<std::size_t>(skip);
        selected.push_back(pos);
        ++pos;
    }
}

// Removes the listed positions (ascending) from `list` by swap-and-pop,
// handing each removed element to `visit`.
template <class Visit>
void remove_positions(std::vector<std::uint32_t>& list, const std::vector<std::size_t>& positions,
                      Visit&& visit)
{
    for (auto it = positions.rbegin(); it != positions.rend(); ++it) {
        const std::uint32_t agent = list[*it];
        list[*it] = list.back();
        list.pop_back();
        visit(agent);
    }
}

} // namespace

void AbmConfig::validate() const
{
    if (n_locations == 0 || agents_per_location == 0) {
        throw DomainError("AbmConfig: need at least one location and one agent per location");
    }
    if (agents_per_location > std::numeric_limits<std::uint32_t>::max()) {
        throw DomainError("AbmConfig: too many agents per location");
    }
    if (!(beta > 0.0) || !(gamma > 0.0)) {
        throw DomainError("AbmConfig: beta and gamma must be positive");
    }
    if (gamma * dt > 1.0) {
        throw DomainError("AbmConfig: gamma * dt must not exceed 1");
    }
    static_cast<void>(steps());
    if (control) {
        if (control->n_cells() != n_locations) {
            throw DimensionError("AbmConfig: control has wrong number of cells");
        }
        const double span = static_cast<double>(control->n_times() - 1) * control->dt();
        if (span + 1e-9 < T) {
            throw DimensionError("AbmConfig: control does not cover [0, T]");
        }
    }
}

double expected_initial_infected(const AbmConfig& cfg, const InitialCondition& ic)
{
    return static_cast<double>(cfg.agents_per_location) * ic.z0.sum();
}

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t location, std::uint64_t step,
                          std::uint64_t purpose)
{
    return splitmix64(splitmix64(splitmix64(splitmix64(seed) ^ location) ^ step) ^ purpose);
}

Vector AbmPopulation::infected_fraction() const
{
    Vector out(static_cast<Eigen::Index>(locations.size()));
    for (std::size_t j = 0; j < locations.size(); ++j) {
        out[static_cast<Eigen::Index>(j)] = static_cast<double>(locations[j].infected.size())
            / static_cast<double>(locations[j].population());
    }
    return out;
}

Vector AbmPopulation::recovered_fraction() const
{
    Vector out(static_cast<Eigen::Index>(locations.size()));
    for (std::size_t j = 0; j < locations.size(); ++j) {
        out[static_cast<Eigen::Index>(j)] = static_cast<double>(locations[j].recovered)
            / static_cast<double>(locations[j].population());
    }
    return out;
}

AbmPopulation init_population(const AbmConfig& cfg, const InitialCondition& ic)
{
    cfg.validate();
    ic.validate(cfg.n_locations);

    AbmPopulation population;
    population.locations.resize(cfg.n_locations);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (std::size_t j = 0; j < cfg.n_locations; ++j) {
        Location& loc = population.locations[j];
        const auto n = cfg.agents_per_location;
        loc.state.assign(n, AgentState::Susceptible);
        loc.infected_at.assign(n, -1);
        loc.susceptible.clear();
        loc.infected.clear();

        const double z0 = ic.z0[static_cast<Eigen::Index>(j)];
        const double r0 = ic.r0[static_cast<Eigen::Index>(j)];
        std::mt19937_64 rng(stream_seed(cfg.seed, j, 0, kPurposeInit));
        for (std::uint32_t a = 0; a < n; ++a) {
            const double draw = unit(rng);
            if (draw < z0) {
                loc.state[a] = AgentState::Infected;
                loc.infected_at[a] = 0;
                loc.infected.push_back(a);
            } else if (draw < z0 + r0) {
                loc.state[a] = AgentState::Recovered;
                ++loc.recovered;
            } else {
                loc.susceptible.push_back(a);
            }
        }
    }
    return population;
}

void step(AbmPopulation& population, std::size_t step_index, const AbmConfig& cfg,
          const KernelMatrix& kernel)
{
    const std::size_t n_loc = population.locations.size();
    if (kernel.size() != n_loc) {
        throw DimensionError("abm::step: kernel grid does not match the number of locations");
    }
    const double t = static_cast<double>(step_index) * cfg.dt;
    const Vector u = cfg.control ? cfg.control->slice_at_time(t)
                                 : Vector::Zero(static_cast<Eigen::Index>(n_loc));

    Vector force, az;
    kernel.apply(population.infected_fraction(), u, force, az);
    force *= cfg.beta;

    const double p_recover = std::min(1.0, cfg.gamma * cfg.dt);
    std::vector<std::size_t> selected;
    for (std::size_t j = 0; j < n_loc; ++j) {
        Location& loc = population.locations[j];
        std::mt19937_64 rng(stream_seed(cfg.seed, j, step_index + 1, kPurposeStep));

        // recoveries first, so that agents infected in this step stay infected
        bernoulli_select(loc.infected.size(), p_recover, rng, selected);
        remove_positions(loc.infected, selected, [&](std::uint32_t agent) {
            loc.state[agent] = AgentState::Recovered;
            ++loc.recovered;
            population.infectious_time_total
                += static_cast<double>(static_cast<std::int64_t>(step_index) + 1
                                       - loc.infected_at[agent])
                * cfg.dt;
            ++population.recoveries;
        });

        const double p_infect = -std::expm1(-std::max(force[static_cast<Eigen::Index>(j)], 0.0) * cfg.dt);
        bernoulli_select(loc.susceptible.size(), p_infect, rng, selected);
        remove_positions(loc.susceptible, selected, [&](std::uint32_t agent) {
            loc.state[agent] = AgentState::Infected;
            loc.infected_at[agent] = static_cast<std::int32_t>(step_index + 1);
            loc.infected.push_back(agent);
        });
    }
}

double AbmRun::mean_infectious_period() const
{
    return recoveries > 0 ? infectious_time_total / static_cast<double>(recoveries) : 0.0;
}

AbmRun run(const AbmConfig& cfg, const InitialCondition& ic)
{
    const KernelMatrix kernel(cfg.kernel, SpatialGrid(cfg.n_locations));
    AbmPopulation population = init_population(cfg, ic);
    const std::size_t steps = cfg.steps();
    const auto rows = static_cast<Eigen::Index>(steps + 1);
    const auto cols = static_cast<Eigen::Index>(cfg.n_locations);

    AbmRun out;
    out.seed = cfg.seed;
    out.times = Vector::LinSpaced(rows, 0.0, static_cast<double>(steps) * cfg.dt);
    out.z_density.resize(rows, cols);
    out.r_density.resize(rows, cols);
    out.z_density.row(0) = population.infected_fraction().transpose();
    out.r_density.row(0) = population.recovered_fraction().transpose();
    for (std::size_t s = 0; s < steps; ++s) {
        step(population, s, cfg, kernel);
        out.z_density.row(static_cast<Eigen::Index>(s + 1)) = population.infected_fraction().transpose();
        out.r_density.row(static_cast<Eigen::Index>(s + 1)) = population.recovered_fraction().transpose();
    }
    out.infectious_time_total = population.infectious_time_total;
    out.recoveries = population.recoveries;
    return out;
}

double EnsembleResult::mean_infectious_period() const
{
    double total = 0.0;
    std::size_t count = 0;
    for (const auto& r : runs) {
        total += r.infectious_time_total;
        count += r.recoveries;
    }
    return count > 0 ? total / static_cast<double>(count) : 0.0;
}

EnsembleResult run_ensemble(const AbmConfig& cfg, const InitialCondition& ic, std::size_t n_runs,
                            std::uint64_t base_seed, std::size_t threads)
{
    if (n_runs == 0) {
        throw DomainError("run_ensemble: need at least one run");
    }
    cfg.validate();
    EnsembleResult out;
    out.runs.resize(n_runs);

    if (threads == 0) {
        threads = std::max(1u, std::thread::hardware_concurrency());
    }
    threads = std::min(threads, n_runs);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t k = next++; k < n_runs; k = next++) {
            AbmConfig run_cfg = cfg;
            run_cfg.seed = base_seed + k;
            out.runs[k] = run(run_cfg, ic);
        }
    };
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < threads; ++t) {
            pool.emplace_back(worker);
        }
        for (auto& th : pool) {
            th.join();
        }
    }

    out.times = out.runs.front().times;
    out.mean_z = Matrix::Zero(out.runs.front().z_density.rows(), out.runs.front().z_density.cols());
    out.mean_r = out.mean_z;
    for (const auto& r : out.runs) {
        out.mean_z += r.z_density;
        out.mean_r += r.r_density;
    }
    out.mean_z /= static_cast<double>(n_runs);
    out.mean_r /= static_cast<double>(n_runs);
    return out;
}

ComparisonReport compare(const EnsembleResult& abm, const StateField& det, const SpatialGrid& grid)
{
    if (abm.times.size() < 2 || det.n_times() < 2) {
        throw DimensionError("compare: need at least two time points");
    }
    if (static_cast<std::size_t>(abm.mean_z.cols()) != det.n_cells() || det.n_cells() != grid.size()) {
        throw DimensionError("compare: spatial grids differ");
    }
    const double abm_dt = abm.times[1] - abm.times[0];
    const double det_dt = det.dt();
    const double ratio = abm_dt / det_dt;
    const auto stride = static_cast<Eigen::Index>(std::llround(ratio));
    if (stride < 1 || std::abs(ratio - static_cast<double>(stride)) > 1e-9) {
        throw DimensionError("compare: deterministic dt must divide the ABM dt");
    }
    const Eigen::Index rows = abm.mean_z.rows();
    if ((rows - 1) * stride > static_cast<Eigen::Index>(det.n_times()) - 1) {
        throw DimensionError("compare: deterministic run is shorter than the ABM run");
    }

    ComparisonReport out;
    out.times = abm.times;
    out.difference.resize(rows, abm.mean_z.cols());
    for (Eigen::Index n = 0; n < rows; ++n) {
        out.difference.row(n) = det.z.row(n * stride) - abm.mean_z.row(n);
    }
    out.sup_norm = out.difference.cwiseAbs().maxCoeff();
    Vector time_w = Vector::Constant(rows, abm_dt);
    time_w[0] *= 0.5;
    time_w[rows - 1] *= 0.5;
    const Vector sq = out.difference.cwiseAbs2() * grid.weights();
    out.l2_norm = std::sqrt(time_w.dot(sq));
    out.abm_mean = abm.mean_z * grid.weights();
    out.det_mean.resize(rows);
    for (Eigen::Index n = 0; n < rows; ++n) {
        out.det_mean[n] = det.z.row(n * stride).dot(grid.weights());
    }
    return out;
}

} // namespace idsir
