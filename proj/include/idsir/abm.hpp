#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "idsir/grid_kernel.hpp"
#include "idsir/sir_forward.hpp"
#include "idsir/types.hpp"

namespace idsir {

struct AbmConfig {
    std::size_t n_locations = 100;
    std::size_t agents_per_location = 50000;
    double beta = 0.1;
    double gamma = 0.1;
    KernelSpec kernel;
    double dt = 0.25;
    double T = 400.0;
    std::uint64_t seed = 1;
    /// Lockdown applied through the kernel; none means u = 0.
    std::optional<ControlField> control;

    std::size_t steps() const { return step_count(T, dt); }
    /// Throws DomainError/ConfigError on inconsistent settings.
    void validate() const;
};

enum class AgentState : std::uint8_t { Susceptible, Infected, Recovered };

/// Agents of one location. Index lists keep the susceptible and infected
/// agents so that per-step Bernoulli trials can skip geometrically.
struct Location {
    std::vector<AgentState> state;
    std::vector<std::int32_t> infected_at; ///< step index at which the agent became infected
    std::vector<std::uint32_t> susceptible;
    std::vector<std::uint32_t> infected;
    std::size_t recovered = 0;

    std::size_t population() const { return state.size(); }
};

struct AbmPopulation {
    std::vector<Location> locations;
    double infectious_time_total = 0.0; ///< summed durations of completed infections, days
    std::size_t recoveries = 0;

    Vector infected_fraction() const;
    Vector recovered_fraction() const;
};

/// Expected number of initially infected agents over all locations.
double expected_initial_infected(const AbmConfig& cfg, const InitialCondition& ic);

/// Seeded 64-bit stream for (seed, location, step, purpose). Streams are
/// independent of the order in which locations are processed.
std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t location, std::uint64_t step,
                          std::uint64_t purpose);

/// Each agent is independently infected with probability z0(x_j), recovered
/// with probability r0(x_j), susceptible otherwise.
AbmPopulation init_population(const AbmConfig& cfg, const InitialCondition& ic);

/// One synchronous step from t_step to t_step + dt. Susceptibles at x_i are
/// infected with probability 1 - exp(-F_i dt),
/// F_i = beta * sum_j k(|x_i - x_j|; u(t, x_i)) w_j I_j / N_j; infected agents
/// recover with probability gamma * dt. Both use the pre-step state.
void step(AbmPopulation& population, std::size_t step_index, const AbmConfig& cfg,
          const KernelMatrix& kernel);

struct AbmRun {
    Vector times;
    Matrix z_density;
    Matrix r_density;
    std::uint64_t seed = 0;
    double infectious_time_total = 0.0;
    std::size_t recoveries = 0;

    double mean_infectious_period() const;
};

AbmRun run(const AbmConfig& cfg, const InitialCondition& ic);

struct EnsembleResult {
    std::vector<AbmRun> runs;
    Vector times;
    Matrix mean_z;
    Matrix mean_r;

    double mean_infectious_period() const;
};

/// Runs seeds base_seed + 0 ... base_seed + n_runs - 1, in parallel up to
/// `threads` workers (0 = hardware concurrency). Output does not depend on
/// the thread count.
EnsembleResult run_ensemble(const AbmConfig& cfg, const InitialCondition& ic, std::size_t n_runs,
                            std::uint64_t base_seed, std::size_t threads = 0);

struct ComparisonReport {
    Vector times;
    Matrix difference; ///< z_det - mean_z at ABM output times
    double sup_norm = 0.0;
    double l2_norm = 0.0; ///< sqrt(int int difference^2 dx dt), trapezoid in time
    Vector det_mean;      ///< spatial mean of z_det
    Vector abm_mean;      ///< spatial mean of the ensemble mean
};

/// The deterministic field is subsampled at the ABM output times; its dt
/// must divide the ABM dt.
ComparisonReport compare(const EnsembleResult& abm, const StateField& det,
                         const SpatialGrid& grid);

} // namespace idsir
