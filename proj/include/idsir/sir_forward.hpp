#pragma once

#include <cstddef>
#include <string_view>
#include <utility>

#include "idsir/grid_kernel.hpp"
#include "idsir/types.hpp"

namespace idsir {

struct EpidemicParams {
    double beta = 0.1;  ///< transmission rate, 1/day
    double gamma = 0.1; ///< recovery rate, 1/day

    /// Throws DomainError unless both rates are strictly positive.
    void validate() const;
};

struct InitialCondition {
    Vector z0; ///< infected fraction per cell
    Vector r0; ///< recovered fraction per cell

    static InitialCondition uniform(std::size_t n, double z, double r = 0.0);
    /// Infected fraction `low` below x_split and `high` from x_split on.
    static InitialCondition step(const SpatialGrid& grid, double low, double high, double x_split);

    /// Throws DomainError when z0 < 0, r0 < 0 or z0 + r0 > 1 somewhere.
    void validate(std::size_t n) const;
};

enum class ControlKind { TimeOnly, SpaceTime, PiecewiseConstant };

std::string_view to_string(ControlKind kind);

/// Lockdown intensity u(t, x) in [0,1] on the time nodes t_n = n * dt.
///
/// Degrees of freedom depend on the kind: one value per time node for
/// TimeOnly, one per (node, cell) for SpaceTime, and one per (time block,
/// space block) for PiecewiseConstant. Within a time step [t_n, t_{n+1}) the
/// value at t_n applies.
class ControlField {
public:
    /// Empty field with no degrees of freedom; use the factories.
    ControlField() = default;

    static ControlField time_only(Vector values, double dt, std::size_t n_cells);
    static ControlField space_time(Matrix values, double dt);
    /// `blocks` has one row per time block of `steps_per_block` steps and one
    /// column per space block of `cells_per_block` cells. The terminal time
    /// node belongs to the last time block.
    static ControlField piecewise(Matrix blocks, double dt, std::size_t steps_per_block,
                                  std::size_t cells_per_block, std::size_t n_times,
                                  std::size_t n_cells);
    /// Constant control of the given kind with the given block layout.
    static ControlField constant(ControlKind kind, double value, double dt, std::size_t n_times,
                                 std::size_t n_cells, std::size_t steps_per_block = 1,
                                 std::size_t cells_per_block = 1);

    ControlKind kind() const { return kind_; }
    double dt() const { return dt_; }
    std::size_t n_times() const { return n_times_; }
    std::size_t n_cells() const { return n_cells_; }
    std::size_t steps_per_block() const { return steps_per_block_; }
    std::size_t cells_per_block() const { return cells_per_block_; }

    /// Raw degrees of freedom (TimeOnly: n_times x 1).
    const Matrix& dofs() const { return dofs_; }
    /// Same layout and kind with new degree-of-freedom values.
    ControlField with_dofs(Matrix dofs) const;

    double at(std::size_t time_index, std::size_t cell) const;
    /// u(t_n, .) over all cells.
    Vector slice(std::size_t time_index) const;
    /// Value in force at time t (the node at or before t).
    Vector slice_at_time(double t) const;
    /// Evaluation on the full (n_times x n_cells) grid.
    Matrix dense() const;

    double min() const { return dofs_.minCoeff(); }
    double max() const { return dofs_.maxCoeff(); }

private:

    ControlKind kind_ = ControlKind::TimeOnly;
    double dt_ = 1.0;
    std::size_t n_times_ = 0;
    std::size_t n_cells_ = 0;
    std::size_t steps_per_block_ = 1;
    std::size_t cells_per_block_ = 1;
    Matrix dofs_;
};

/// Trajectories z(t_n, x_i), r(t_n, x_i) on a uniform time grid.
struct StateField {
    Vector times;
    Matrix z;
    Matrix r;

    std::size_t n_times() const { return static_cast<std::size_t>(times.size()); }
    std::size_t n_cells() const { return static_cast<std::size_t>(z.cols()); }
    double dt() const { return times.size() > 1 ? times[1] - times[0] : 0.0; }
};

/// Pointwise derivatives of the integro-differential SIR system for the
/// control slice u (one value per cell).
std::pair<Vector, Vector> rhs(const Vector& z, const Vector& r, const Vector& u,
                              const EpidemicParams& params, const KernelMatrix& kernel);

/// Classical RK4 with fixed dt; the control is held at its step-start value.
/// Throws IntegrationError naming the step if z drops below -1e-10, if
/// z + r exceeds 1 + 1e-12, or on non-finite values.
StateField integrate_forward(const InitialCondition& ic, const ControlField& control,
                             const EpidemicParams& params, const KernelMatrix& kernel, double T,
                             double dt);

/// Number of steps T/dt; throws DomainError unless T is a positive multiple of dt.
std::size_t step_count(double T, double dt);

/// Spatial mean of z per time node.
Vector spatial_mean(const StateField& field, const SpatialGrid& grid);
Vector spatial_mean(const Matrix& field, const SpatialGrid& grid);

} // namespace idsir
