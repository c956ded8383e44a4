#include "idsir/sir_forward.hpp"

#include <cmath>
#include <string>

#include "dynamics.hpp"

namespace idsir {

void EpidemicParams::validate() const
{
    if (!(beta > 0.0) || !(gamma > 0.0)) {
        throw DomainError("EpidemicParams: beta and gamma must be positive");
    }
}

InitialCondition InitialCondition::uniform(std::size_t n, double z, double r)
{
    const auto size = static_cast<Eigen::Index>(n);
    return {Vector::Constant(size, z), Vector::Constant(size, r)};
}

InitialCondition InitialCondition::step(const SpatialGrid& grid, double low, double high,
                                        double x_split)
{
    InitialCondition ic = uniform(grid.size(), low);
    for (Eigen::Index i = 0; i < ic.z0.size(); ++i) {
        if (grid.nodes()[i] >= x_split) {
            ic.z0[i] = high;
        }
    }
    return ic;
}

void InitialCondition::validate(std::size_t n) const
{
    const auto size = static_cast<Eigen::Index>(n);
    if (z0.size() != size || r0.size() != size) {
        throw DimensionError("InitialCondition: expected " + std::to_string(n) + " cells");
    }
    for (Eigen::Index i = 0; i < size; ++i) {
        if (!(z0[i] >= 0.0) || !(r0[i] >= 0.0) || z0[i] + r0[i] > 1.0) {
            throw DomainError("InitialCondition: need 0 <= z0, 0 <= r0, z0 + r0 <= 1 (cell "
                              + std::to_string(i) + ")");
        }
    }
}

std::string_view to_string(ControlKind kind)
{
    switch (kind) {
    case ControlKind::TimeOnly:
        return "time_only";
    case ControlKind::SpaceTime:
        return "space_time";
    case ControlKind::PiecewiseConstant:
        return "piecewise_constant";
    }
    return "unknown";
}

namespace {

void check_unit_interval(const Matrix& values, const char* what)
{
    if (values.size() > 0 && !(values.minCoeff() >= 0.0 && values.maxCoeff() <= 1.0)) {
        throw DomainError(std::string(what) + ": control values must lie in [0,1]");
    }
}

} // namespace

ControlField ControlField::time_only(Vector values, double dt, std::size_t n_cells)
{
    ControlField field;
    field.kind_ = ControlKind::TimeOnly;
    field.dt_ = dt;
    field.n_times_ = static_cast<std::size_t>(values.size());
    field.n_cells_ = n_cells;
    field.dofs_ = Eigen::Map<Matrix>(values.data(), values.size(), 1);
    check_unit_interval(field.dofs_, "ControlField::time_only");
    return field;
}

ControlField ControlField::space_time(Matrix values, double dt)
{
    ControlField field;
    field.kind_ = ControlKind::SpaceTime;
    field.dt_ = dt;
    field.n_times_ = static_cast<std::size_t>(values.rows());
    field.n_cells_ = static_cast<std::size_t>(values.cols());
    field.dofs_ = std::move(values);
    check_unit_interval(field.dofs_, "ControlField::space_time");
    return field;
}

ControlField ControlField::piecewise(Matrix blocks, double dt, std::size_t steps_per_block,
                                     std::size_t cells_per_block, std::size_t n_times,
                                     std::size_t n_cells)
{
    if (steps_per_block == 0 || cells_per_block == 0 || n_times < 2
        || (n_times - 1) % steps_per_block != 0 || n_cells % cells_per_block != 0) {
        throw ConfigError("ControlField::piecewise: blocks must tile the time and space grid");
    }
    const auto time_blocks = static_cast<Eigen::Index>((n_times - 1) / steps_per_block);
    const auto space_blocks = static_cast<Eigen::Index>(n_cells / cells_per_block);
    if (blocks.rows() != time_blocks || blocks.cols() != space_blocks) {
        throw DimensionError("ControlField::piecewise: block matrix has wrong shape");
    }
    ControlField field;
    field.kind_ = ControlKind::PiecewiseConstant;
    field.dt_ = dt;
    field.n_times_ = n_times;
    field.n_cells_ = n_cells;
    field.steps_per_block_ = steps_per_block;
    field.cells_per_block_ = cells_per_block;
    field.dofs_ = std::move(blocks);
    check_unit_interval(field.dofs_, "ControlField::piecewise");
    return field;
}

ControlField ControlField::constant(ControlKind kind, double value, double dt,
                                    std::size_t n_times, std::size_t n_cells,
                                    std::size_t steps_per_block, std::size_t cells_per_block)
{
    const auto nt = static_cast<Eigen::Index>(n_times);
    const auto nc = static_cast<Eigen::Index>(n_cells);
    switch (kind) {
    case ControlKind::TimeOnly:
        return time_only(Vector::Constant(nt, value), dt, n_cells);
    case ControlKind::SpaceTime:
        return space_time(Matrix::Constant(nt, nc, value), dt);
    case ControlKind::PiecewiseConstant: {
        if (steps_per_block == 0 || cells_per_block == 0) {
            throw ConfigError("ControlField::constant: zero block size");
        }
        const auto tb = static_cast<Eigen::Index>((n_times - 1) / steps_per_block);
        const auto sb = static_cast<Eigen::Index>(n_cells / cells_per_block);
        return piecewise(Matrix::Constant(tb, sb, value), dt, steps_per_block, cells_per_block,
                         n_times, n_cells);
    }
    }
    throw ConfigError("ControlField::constant: unknown kind");
}

ControlField ControlField::with_dofs(Matrix dofs) const
{
    if (dofs.rows() != dofs_.rows() || dofs.cols() != dofs_.cols()) {
        throw DimensionError("ControlField::with_dofs: shape mismatch");
    }
    check_unit_interval(dofs, "ControlField::with_dofs");
    ControlField copy = *this;
    copy.dofs_ = std::move(dofs);
    return copy;
}

double ControlField::at(std::size_t time_index, std::size_t cell) const
{
    switch (kind_) {
    case ControlKind::TimeOnly:
        return dofs_(static_cast<Eigen::Index>(time_index), 0);
    case ControlKind::SpaceTime:
        return dofs_(static_cast<Eigen::Index>(time_index), static_cast<Eigen::Index>(cell));
    case ControlKind::PiecewiseConstant: {
        auto block = static_cast<Eigen::Index>(time_index / steps_per_block_);
        block = std::min(block, dofs_.rows() - 1);
        return dofs_(block, static_cast<Eigen::Index>(cell / cells_per_block_));
    }
    }
    return 0.0;
}

Vector ControlField::slice(std::size_t time_index) const
{
    if (time_index >= n_times_) {
        throw DimensionError("ControlField::slice: time index out of range");
    }
    Vector out(static_cast<Eigen::Index>(n_cells_));
    for (std::size_t i = 0; i < n_cells_; ++i) {
        out[static_cast<Eigen::Index>(i)] = at(time_index, i);
    }
    return out;
}

Vector ControlField::slice_at_time(double t) const
{
    // small slack so that t = n*dt computed in floating point maps to node n
    auto index = static_cast<std::size_t>(std::floor(t / dt_ + 1e-9));
    if (index >= n_times_) {
        index = n_times_ - 1;
    }
    return slice(index);
}

Matrix ControlField::dense() const
{
    Matrix out(static_cast<Eigen::Index>(n_times_), static_cast<Eigen::Index>(n_cells_));
    for (std::size_t n = 0; n < n_times_; ++n) {
        out.row(static_cast<Eigen::Index>(n)) = slice(n).transpose();
    }
    return out;
}

std::pair<Vector, Vector> rhs(const Vector& z, const Vector& r, const Vector& u,
                              const EpidemicParams& params, const KernelMatrix& kernel)
{
    const auto n = static_cast<Eigen::Index>(kernel.size());
    if (z.size() != n || r.size() != n || u.size() != n) {
        throw DimensionError("rhs: z, r, u must match the grid size");
    }
    const detail::Dynamics dyn(kernel, params);
    Vector chi(n), az(n), dz(n), dr(n);
    dyn.rhs(z, r, u, chi, az, dz, dr);
    return {std::move(dz), std::move(dr)};
}

std::size_t step_count(double T, double dt)
{
    if (!(dt > 0.0) || !(T > 0.0)) {
        throw DomainError("step_count: T and dt must be positive");
    }
    const double ratio = T / dt;
    const double rounded = std::round(ratio);
    if (std::abs(ratio - rounded) > 1e-9 * std::max(1.0, ratio)) {
        throw DomainError("step_count: T must be a multiple of dt");
    }
    return static_cast<std::size_t>(rounded);
}

StateField integrate_forward(const InitialCondition& ic, const ControlField& control,
                             const EpidemicParams& params, const KernelMatrix& kernel, double T,
                             double dt)
{
    params.validate();
    const std::size_t n_cells = kernel.size();
    ic.validate(n_cells);
    const std::size_t steps = step_count(T, dt);
    if (control.n_times() != steps + 1 || control.n_cells() != n_cells) {
        throw DimensionError("integrate_forward: control grid does not match (T, dt, grid)");
    }

    const auto n = static_cast<Eigen::Index>(n_cells);
    const auto rows = static_cast<Eigen::Index>(steps + 1);
    StateField out;
    out.times = Vector::LinSpaced(rows, 0.0, static_cast<double>(steps) * dt);
    out.z.resize(rows, n);
    out.r.resize(rows, n);
    out.z.row(0) = ic.z0.transpose();
    out.r.row(0) = ic.r0.transpose();

    const detail::Dynamics dyn(kernel, params);
    detail::Rk4Stages stages(n);
    Vector z = ic.z0, r = ic.r0, z_next(n), r_next(n);
    for (std::size_t step = 0; step < steps; ++step) {
        const Vector u = control.slice(step);
        stages.evaluate(dyn, z, r, u, dt);
        stages.combine(z, r, dt, z_next, r_next);

        if (!z_next.allFinite() || !r_next.allFinite()) {
            throw IntegrationError("integrate_forward: non-finite state at step "
                                   + std::to_string(step + 1));
        }
        if (z_next.minCoeff() < -1e-10) {
            throw IntegrationError("integrate_forward: negative infected density at step "
                                   + std::to_string(step + 1) + " (reduce dt)");
        }
        if ((z_next + r_next).maxCoeff() > 1.0 + 1e-12) {
            throw IntegrationError("integrate_forward: z + r exceeds 1 at step "
                                   + std::to_string(step + 1));
        }
        z.swap(z_next);
        r.swap(r_next);
        out.z.row(static_cast<Eigen::Index>(step + 1)) = z.transpose();
        out.r.row(static_cast<Eigen::Index>(step + 1)) = r.transpose();
    }
    return out;
}

Vector spatial_mean(const Matrix& field, const SpatialGrid& grid)
{
    if (static_cast<std::size_t>(field.cols()) != grid.size()) {
        throw DimensionError("spatial_mean: field width does not match grid");
    }
    return field * grid.weights();
}

Vector spatial_mean(const StateField& field, const SpatialGrid& grid)
{
    return spatial_mean(field.z, grid);
}

} // namespace idsir
