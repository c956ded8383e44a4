#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

#include "idsir/grid_kernel.hpp"
#include "idsir/sir_forward.hpp"
#include "idsir/types.hpp"

namespace idsir {

/// Weights of the target functional
///   J = int int z + eta/2 int int u^2 (1 + c1/2 psi(z_min - z)) + omega/2 int int c2 psi(z - z_max).
struct CostParams {
    double eta = 0.02;
    double omega = 1.0;
    double c1 = 1000.0;
    double c2 = 1.0;
    double z_min = 1e-5;
    double z_max = 5e-3;
    double psi_slope = 1000.0;

    /// Throws DomainError unless eta, omega, psi_slope > 0, c1, c2 >= 0 and
    /// 0 < z_min < z_max < 1.
    void validate() const;
};

/// Smooth step 1 + tanh(slope * z).
double psi(double z, double slope = 1000.0);
/// slope * sech^2(slope * z).
double psi_prime(double z, double slope = 1000.0);

/// Trapezoid weights in time: dt/2 at both ends, dt inside.
Vector trapezoid_weights(std::size_t n_times, double dt);

struct CostBreakdown {
    double infected = 0.0; ///< int int z
    double control = 0.0;  ///< eta/2 int int u^2 (1 + c1/2 psi(z_min - z))
    double capacity = 0.0; ///< omega/2 int int c2 psi(z - z_max)

    double total() const { return infected + control + capacity; }
};

/// Midpoint rule in space, trapezoid in time. TimeOnly controls give the
/// u^2(t) * int(...) dx form; other kinds are scored pointwise in (t, x).
CostBreakdown cost_breakdown(const StateField& state, const ControlField& control,
                             const CostParams& costs, const SpatialGrid& grid);
double cost_functional(const StateField& state, const ControlField& control,
                       const CostParams& costs, const SpatialGrid& grid);

/// Costates of the discrete forward model, scaled to densities.
///
/// lambda1/lambda2 are the sensitivities of the remaining cost to z and r,
/// with lambda(T) = 0. `drive` is the sensitivity of the dynamics to the
/// control over the step starting at t_n, scaled like the continuous term
/// beta * lambda1 * (1 - z - r) * int z a dy; it is zero at T.
struct AdjointField {
    Matrix lambda1;
    Matrix lambda2;
    Matrix drive;
};

/// Exact reverse-mode sweep through the RK4 steps of integrate_forward.
/// Throws IntegrationError on non-finite costates.
AdjointField integrate_adjoint_backward(const StateField& state, const ControlField& control,
                                        const EpidemicParams& params, const KernelMatrix& kernel,
                                        const CostParams& costs);

/// dJ/d(dofs) in the layout of control.dofs(), from the adjoint field.
Matrix cost_gradient(const StateField& state, const ControlField& control,
                     const AdjointField& adjoint, const CostParams& costs, const SpatialGrid& grid);

/// Time-only update, clipped to [0,1]:
///   u(t) = int drive dx / (eta int (1 + c1/2 psi(z_min - z)) dx).
Vector control_update_time(const StateField& state, const AdjointField& adjoint,
                           const CostParams& costs, const SpatialGrid& grid);

/// Space-time update, clipped to [0,1]:
///   u(t,x) = drive / (eta (1 + c1/2 psi(z_min - z))).
Matrix control_update_spacetime(const StateField& state, const AdjointField& adjoint,
                                const CostParams& costs);

/// Piecewise-constant projection of a dense (n_times x n_cells) control: the
/// value at the start of each time block, averaged over the cells of each
/// space block. Throws ConfigError when the blocks do not tile the grid.
ControlField project_piecewise(const Matrix& dense, double dt, double time_block,
                               std::size_t space_block);
ControlField project_piecewise(const ControlField& control, double time_block,
                               std::size_t space_block);

struct SweepConfig {
    double sigma = 0.1;       ///< nominal relaxation
    double tol = 1e-4;        ///< on sigma * ||u_hat - u||_inf
    std::size_t max_iter = 500;
    double u_init = 0.5;
    double sigma_min = 1e-6;  ///< backtracking floor

    void validate() const;
};

struct ControlProblem {
    InitialCondition ic;
    EpidemicParams params;
    KernelSpec kernel;
    std::size_t n_points = 100;
    CostParams costs;
    double T = 400.0;
    double dt = 0.25;
    ControlKind kind = ControlKind::TimeOnly;
    double time_block = 10.0;     ///< days, PiecewiseConstant only
    std::size_t space_block = 10; ///< cells, PiecewiseConstant only

    std::size_t steps_per_block() const;
    /// Constant control with this problem's layout.
    ControlField constant_control(double value) const;
};

enum class SweepStatus { Converged, Stalled, MaxIterations };

std::string_view to_string(SweepStatus status);

struct SweepResult {
    ControlField control;
    StateField state;
    AdjointField adjoint;
    std::vector<double> j_log; ///< J of every accepted iterate, starting with u_init
    std::vector<double> sigma_log;
    std::size_t iterations = 0;
    SweepStatus status = SweepStatus::MaxIterations;

    bool converged() const { return status == SweepStatus::Converged; }
    double J() const { return j_log.back(); }
};

/// Relaxed forward-backward sweep.
///
/// Each iteration solves forward, solves the adjoint, forms u_hat from the
/// update formula (projected for PiecewiseConstant) and moves
/// u <- clip((1 - s) u + s u_hat). The step s starts at sigma and is halved
/// while J would increase, so the J log never increases; after an accepted
/// step s grows back towards sigma. Stops when sigma * ||u_hat - u|| < tol
/// (Converged), when s falls below sigma_min (Stalled) or after max_iter.
SweepResult fbs_solve(const ControlProblem& problem, const SweepConfig& sweep);

} // namespace idsir
