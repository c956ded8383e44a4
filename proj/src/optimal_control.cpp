#include "idsir/optimal_control.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dynamics.hpp"

namespace idsir {

void CostParams::validate() const
{
    if (!(eta > 0.0) || !(omega > 0.0) || !(psi_slope > 0.0)) {
        throw DomainError("CostParams: eta, omega and psi_slope must be positive");
    }
    if (!(c1 >= 0.0) || !(c2 >= 0.0)) {
        throw DomainError("CostParams: c1 and c2 must be non-negative");
    }
    if (!(0.0 < z_min && z_min < z_max && z_max < 1.0)) {
        throw DomainError("CostParams: need 0 < z_min < z_max < 1");
    }
}

double psi(double z, double slope)
{
    return 1.0 + std::tanh(slope * z);
}

double psi_prime(double z, double slope)
{
    const double sech = 1.0 / std::cosh(slope * z);
    return slope * sech * sech;
}

Vector trapezoid_weights(std::size_t n_times, double dt)
{
    Vector w = Vector::Constant(static_cast<Eigen::Index>(n_times), dt);
    if (n_times >= 2) {
        w[0] *= 0.5;
        w[w.size() - 1] *= 0.5;
    } else if (n_times == 1) {
        w[0] = 0.0;
    }
    return w;
}

namespace {

void check_compatible(const StateField& state, const ControlField& control,
                      const SpatialGrid& grid)
{
    if (state.n_times() != control.n_times() || state.n_cells() != control.n_cells()
        || state.n_cells() != grid.size()) {
        throw DimensionError("state, control and grid are not on the same (t, x) grid");
    }
}

} // namespace

CostBreakdown cost_breakdown(const StateField& state, const ControlField& control,
                             const CostParams& costs, const SpatialGrid& grid)
{
    check_compatible(state, control, grid);
    const Vector tw = trapezoid_weights(state.n_times(), state.dt());
    const Vector& w = grid.weights();
    const double slope = costs.psi_slope;

    CostBreakdown out;
    for (Eigen::Index n = 0; n < state.z.rows(); ++n) {
        double infected = 0.0, control_term = 0.0, capacity = 0.0;
        for (Eigen::Index i = 0; i < state.z.cols(); ++i) {
            const double z = state.z(n, i);
            const double u = control.at(static_cast<std::size_t>(n), static_cast<std::size_t>(i));
            infected += w[i] * z;
            control_term += w[i] * u * u * (1.0 + 0.5 * costs.c1 * psi(costs.z_min - z, slope));
            capacity += w[i] * costs.c2 * psi(z - costs.z_max, slope);
        }
        out.infected += tw[n] * infected;
        out.control += tw[n] * 0.5 * costs.eta * control_term;
        out.capacity += tw[n] * 0.5 * costs.omega * capacity;
    }
    return out;
}

double cost_functional(const StateField& state, const ControlField& control,
                       const CostParams& costs, const SpatialGrid& grid)
{
    return cost_breakdown(state, control, costs, grid).total();
}

AdjointField integrate_adjoint_backward(const StateField& state, const ControlField& control,
                                        const EpidemicParams& params, const KernelMatrix& kernel,
                                        const CostParams& costs)
{
    const SpatialGrid& grid = kernel.grid();
    check_compatible(state, control, grid);
    const auto n = static_cast<Eigen::Index>(grid.size());
    const auto rows = static_cast<Eigen::Index>(state.n_times());
    const double dt = state.dt();
    const Vector& w = grid.weights();
    const Vector tw = trapezoid_weights(state.n_times(), dt);
    const double slope = costs.psi_slope;

    // Pointwise dL/dz of the running cost at node m.
    auto running_dz = [&](Eigen::Index m, const Vector& u) {
        Vector out(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double z = state.z(m, i);
            out[i] = 1.0 - 0.25 * costs.c1 * costs.eta * u[i] * u[i] * psi_prime(costs.z_min - z, slope)
                + 0.5 * costs.c2 * costs.omega * psi_prime(z - costs.z_max, slope);
        }
        return out;
    };

    AdjointField adj;
    adj.lambda1 = Matrix::Zero(rows, n);
    adj.lambda2 = Matrix::Zero(rows, n);
    adj.drive = Matrix::Zero(rows, n);
    if (rows < 2) {
        return adj;
    }

    const detail::Dynamics dyn(kernel, params);
    detail::Rk4Stages stages(n);

    // p = dJ/dy_{m} (un-normalized cotangent of the state at node m)
    const Eigen::Index last = rows - 1;
    Vector pz = tw[last] * w.cwiseProduct(running_dz(last, control.slice(static_cast<std::size_t>(last))));
    Vector pr = Vector::Zero(n);

    Vector gz(n), gr(n), gu(n), scratch_in(n), scratch_out(n);
    std::array<Vector, 4> bar_kz, bar_kr;
    static constexpr std::array<double, 4> weight{1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0};
    static constexpr std::array<double, 4> offset{0.0, 0.5, 0.5, 1.0};

    for (Eigen::Index m = last - 1; m >= 0; --m) {
        const Vector u = control.slice(static_cast<std::size_t>(m));
        const Vector z0 = state.z.row(m).transpose();
        const Vector r0 = state.r.row(m).transpose();
        stages.evaluate(dyn, z0, r0, u, dt);

        for (int s = 0; s < 4; ++s) {
            bar_kz[s] = weight[s] * dt * pz;
            bar_kr[s] = weight[s] * dt * pr;
        }
        gz = pz;
        gr = pr;
        gu.setZero();
        for (int s = 3; s >= 0; --s) {
            Vector sz = Vector::Zero(n), sr = Vector::Zero(n);
            dyn.vjp(stages.z[s], stages.r[s], u, stages.chi[s], stages.az[s], bar_kz[s], bar_kr[s],
                    sz, sr, gu, scratch_in, scratch_out);
            gz += sz;
            gr += sr;
            if (s > 0) {
                bar_kz[s - 1] += offset[s] * dt * sz;
                bar_kr[s - 1] += offset[s] * dt * sr;
            }
        }

        if (!gz.allFinite() || !gr.allFinite() || !gu.allFinite()) {
            throw IntegrationError("integrate_adjoint_backward: non-finite costate at step "
                                   + std::to_string(m));
        }

        const Vector ldz = running_dz(m, u);
        adj.drive.row(m) = (-gu.array() / (dt * w.array())).transpose();
        adj.lambda1.row(m) = (gz.array() / w.array() + 0.5 * dt * ldz.array()).transpose();
        adj.lambda2.row(m) = (gr.array() / w.array()).transpose();

        pz = gz + tw[m] * w.cwiseProduct(ldz);
        pr = gr;
    }
    return adj;
}

Matrix cost_gradient(const StateField& state, const ControlField& control,
                     const AdjointField& adjoint, const CostParams& costs, const SpatialGrid& grid)
{
    check_compatible(state, control, grid);
    const auto rows = state.z.rows();
    const auto n = state.z.cols();
    const double dt = state.dt();
    const Vector tw = trapezoid_weights(state.n_times(), dt);
    const Vector& w = grid.weights();

    // Gradient with respect to a dense per-(node, cell) control.
    Matrix dense(rows, n);
    for (Eigen::Index m = 0; m < rows; ++m) {
        for (Eigen::Index i = 0; i < n; ++i) {
            const double u = control.at(static_cast<std::size_t>(m), static_cast<std::size_t>(i));
            const double penalty = 1.0 + 0.5 * costs.c1 * psi(costs.z_min - state.z(m, i), costs.psi_slope);
            dense(m, i) = tw[m] * w[i] * costs.eta * u * penalty - dt * w[i] * adjoint.drive(m, i);
        }
    }

    switch (control.kind()) {
    case ControlKind::SpaceTime:
        return dense;
    case ControlKind::TimeOnly:
        return dense.rowwise().sum();
    case ControlKind::PiecewiseConstant: {
        Matrix out = Matrix::Zero(control.dofs().rows(), control.dofs().cols());
        const auto spb = static_cast<Eigen::Index>(control.steps_per_block());
        const auto cpb = static_cast<Eigen::Index>(control.cells_per_block());
        for (Eigen::Index m = 0; m < rows; ++m) {
            const Eigen::Index tb = std::min(m / spb, out.rows() - 1);
            for (Eigen::Index i = 0; i < n; ++i) {
                out(tb, i / cpb) += dense(m, i);
            }
        }
        return out;
    }
    }
    return dense;
}

Vector control_update_time(const StateField& state, const AdjointField& adjoint,
                           const CostParams& costs, const SpatialGrid& grid)
{
    const auto rows = state.z.rows();
    const Vector& w = grid.weights();
    Vector out(rows);
    for (Eigen::Index m = 0; m < rows; ++m) {
        double numerator = 0.0, denominator = 0.0;
        for (Eigen::Index i = 0; i < state.z.cols(); ++i) {
            numerator += w[i] * adjoint.drive(m, i);
            denominator += w[i] * (1.0 + 0.5 * costs.c1 * psi(costs.z_min - state.z(m, i), costs.psi_slope));
        }
        out[m] = std::clamp(numerator / (costs.eta * denominator), 0.0, 1.0);
    }
    return out;
}

Matrix control_update_spacetime(const StateField& state, const AdjointField& adjoint,
                                const CostParams& costs)
{
    Matrix out(state.z.rows(), state.z.cols());
    for (Eigen::Index m = 0; m < out.rows(); ++m) {
        for (Eigen::Index i = 0; i < out.cols(); ++i) {
            const double penalty = 1.0 + 0.5 * costs.c1 * psi(costs.z_min - state.z(m, i), costs.psi_slope);
            out(m, i) = std::clamp(adjoint.drive(m, i) / (costs.eta * penalty), 0.0, 1.0);
        }
    }
    return out;
}

ControlField project_piecewise(const Matrix& dense, double dt, double time_block,
                               std::size_t space_block)
{
    const auto n_times = static_cast<std::size_t>(dense.rows());
    const auto n_cells = static_cast<std::size_t>(dense.cols());
    std::size_t steps = 0;
    try {
        steps = step_count(time_block, dt);
    } catch (const DomainError&) {
        throw ConfigError("project_piecewise: time block must be a positive multiple of dt");
    }
    if (n_times < 2 || (n_times - 1) % steps != 0) {
        throw ConfigError("project_piecewise: horizon is not divisible by the time block");
    }
    if (space_block == 0 || n_cells % space_block != 0) {
        throw ConfigError("project_piecewise: grid size is not divisible by the space block");
    }
    const auto tb = static_cast<Eigen::Index>((n_times - 1) / steps);
    const auto sb = static_cast<Eigen::Index>(n_cells / space_block);
    const auto cells = static_cast<Eigen::Index>(space_block);
    Matrix blocks(tb, sb);
    for (Eigen::Index i = 0; i < tb; ++i) {
        const Eigen::Index start = i * static_cast<Eigen::Index>(steps);
        for (Eigen::Index j = 0; j < sb; ++j) {
            blocks(i, j) = std::clamp(dense.row(start).segment(j * cells, cells).mean(), 0.0, 1.0);
        }
    }
    return ControlField::piecewise(std::move(blocks), dt, steps, space_block, n_times, n_cells);
}

ControlField project_piecewise(const ControlField& control, double time_block,
                               std::size_t space_block)
{
    return project_piecewise(control.dense(), control.dt(), time_block, space_block);
}

void SweepConfig::validate() const
{
    if (!(sigma > 0.0 && sigma <= 1.0)) {
        throw DomainError("SweepConfig: sigma must lie in (0,1]");
    }
    if (!(tol > 0.0) || max_iter == 0) {
        throw DomainError("SweepConfig: tol must be positive and max_iter at least 1");
    }
    if (!(u_init >= 0.0 && u_init <= 1.0)) {
        throw DomainError("SweepConfig: u_init must lie in [0,1]");
    }
    if (!(sigma_min > 0.0 && sigma_min <= sigma)) {
        throw DomainError("SweepConfig: need 0 < sigma_min <= sigma");
    }
}

std::size_t ControlProblem::steps_per_block() const
{
    return kind == ControlKind::PiecewiseConstant ? step_count(time_block, dt) : 1;
}

ControlField ControlProblem::constant_control(double value) const
{
    const std::size_t n_times = step_count(T, dt) + 1;
    return ControlField::constant(kind, value, dt, n_times, n_points, steps_per_block(),
                                  kind == ControlKind::PiecewiseConstant ? space_block : 1);
}

std::string_view to_string(SweepStatus status)
{
    switch (status) {
    case SweepStatus::Converged:
        return "converged";
    case SweepStatus::Stalled:
        return "stalled";
    case SweepStatus::MaxIterations:
        return "max_iterations";
    }
    return "unknown";
}

namespace {

// u_hat in the degree-of-freedom layout of `current`.
Matrix update_target(const ControlProblem& problem, const ControlField& current,
                     const StateField& state, const AdjointField& adjoint, const SpatialGrid& grid)
{
    switch (current.kind()) {
    case ControlKind::TimeOnly:
        return control_update_time(state, adjoint, problem.costs, grid);
    case ControlKind::SpaceTime:
        return control_update_spacetime(state, adjoint, problem.costs);
    case ControlKind::PiecewiseConstant:
        return project_piecewise(control_update_spacetime(state, adjoint, problem.costs),
                                 problem.dt, problem.time_block, problem.space_block)
            .dofs();
    }
    return current.dofs();
}

} // namespace

SweepResult fbs_solve(const ControlProblem& problem, const SweepConfig& sweep)
{
    sweep.validate();
    problem.costs.validate();
    const SpatialGrid grid(problem.n_points);
    const KernelMatrix kernel(problem.kernel, grid);

    auto solve_forward = [&](const ControlField& u) {
        return integrate_forward(problem.ic, u, problem.params, kernel, problem.T, problem.dt);
    };

    SweepResult result{problem.constant_control(sweep.u_init), {}, {}, {}, {}, 0,
                       SweepStatus::MaxIterations};
    result.state = solve_forward(result.control);
    double J = cost_functional(result.state, result.control, problem.costs, grid);
    result.j_log.push_back(J);

    double step = sweep.sigma;
    bool adjoint_current = false;
    for (std::size_t it = 0; it < sweep.max_iter; ++it) {
        result.adjoint = integrate_adjoint_backward(result.state, result.control, problem.params,
                                                    kernel, problem.costs);
        adjoint_current = true;
        const Matrix target = update_target(problem, result.control, result.state,
                                            result.adjoint, grid);
        const Matrix& u = result.control.dofs();
        if (sweep.sigma * (target - u).cwiseAbs().maxCoeff() < sweep.tol) {
            result.status = SweepStatus::Converged;
            break;
        }

        bool accepted = false;
        while (step >= sweep.sigma_min) {
            Matrix candidate = ((1.0 - step) * u + step * target).cwiseMax(0.0).cwiseMin(1.0);
            ControlField trial = result.control.with_dofs(std::move(candidate));
            StateField trial_state = solve_forward(trial);
            const double trial_J = cost_functional(trial_state, trial, problem.costs, grid);
            if (trial_J <= J) {
                result.control = std::move(trial);
                result.state = std::move(trial_state);
                J = trial_J;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            result.status = SweepStatus::Stalled;
            break;
        }
        adjoint_current = false;
        result.iterations = it + 1;
        result.j_log.push_back(J);
        result.sigma_log.push_back(step);
        step = std::min(sweep.sigma, 2.0 * step);
    }

    if (!adjoint_current) {
        result.adjoint = integrate_adjoint_backward(result.state, result.control, problem.params,
                                                    kernel, problem.costs);
    }
    return result;
}

} // namespace idsir
