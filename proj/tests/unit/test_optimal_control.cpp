#include <doctest.h>

#include <cmath>
#include <random>

#include "idsir/optimal_control.hpp"

using namespace idsir;

namespace {

// Coarse instance used for the gradient oracle: n = 20, dt = 1, T = 40,
// A1 costs, and an initial state that crosses both thresholds.
struct Coarse {
    SpatialGrid grid{20};
    KernelMatrix kernel{KernelSpec{}, grid};
    EpidemicParams params;
    CostParams costs;
    InitialCondition ic = InitialCondition::step(grid, 1e-5, 4e-3, 0.7);
    double T = 40.0;
    double dt = 1.0;

    double J(const ControlField& u) const
    {
        return cost_functional(integrate_forward(ic, u, params, kernel, T, dt), u, costs, grid);
    }
};

Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, double lo, double hi, std::mt19937_64& rng)
{
    std::uniform_real_distribution<double> d(lo, hi);
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) {
            m(i, j) = d(rng);
        }
    }
    return m;
}

// Worst relative error of adjoint vs central-difference directional derivatives.
double gradient_check(const Coarse& c, const ControlField& base, std::mt19937_64& rng)
{
    const StateField state = integrate_forward(c.ic, base, c.params, c.kernel, c.T, c.dt);
    const AdjointField adj = integrate_adjoint_backward(state, base, c.params, c.kernel, c.costs);
    const Matrix grad = cost_gradient(state, base, adj, c.costs, c.grid);
    const double h = 1e-5;
    double worst = 0.0;
    for (int k = 0; k < 10; ++k) {
        const Matrix dir = random_matrix(base.dofs().rows(), base.dofs().cols(), -1.0, 1.0, rng);
        const double predicted = grad.cwiseProduct(dir).sum();
        const double fd = (c.J(base.with_dofs(base.dofs() + h * dir)) - c.J(base.with_dofs(base.dofs() - h * dir)))
            / (2.0 * h);
        worst = std::max(worst, std::abs(predicted - fd) / std::max(std::abs(fd), 1e-12));
    }
    return worst;
}

ControlProblem small_problem(ControlKind kind)
{
    ControlProblem p;
    p.n_points = 20;
    p.T = 60.0;
    p.dt = 1.0;
    p.kind = kind;
    p.time_block = 10.0;
    p.space_block = 5;
    p.ic = InitialCondition::uniform(20, 1e-3);
    return p;
}

} // namespace

TEST_CASE("psi and its derivative")
{
    CHECK(psi(0.0) == 1.0);
    CHECK(psi_prime(0.0) == 1000.0);
    CHECK(psi(0.01) == doctest::Approx(2.0).epsilon(1e-8));
    CHECK(psi(-0.01) == doctest::Approx(4.1e-9).epsilon(0.01));
    CHECK(psi(-0.01) > 0.0);
    for (double z : {-3e-3, -1e-4, 0.0, 2e-4, 1e-3}) {
        const double h = 1e-8;
        CHECK(psi_prime(z) == doctest::Approx((psi(z + h) - psi(z - h)) / (2 * h)).epsilon(1e-5));
    }
    CHECK(psi(0.5, 2.0) == doctest::Approx(1.0 + std::tanh(1.0)));
    CHECK(psi_prime(0.5, 2.0) == doctest::Approx(2.0 / std::pow(std::cosh(1.0), 2)));
}

TEST_CASE("trapezoid weights")
{
    const Vector w = trapezoid_weights(5, 0.5);
    CHECK(w[0] == 0.25);
    CHECK(w[1] == 0.5);
    CHECK(w[4] == 0.25);
    CHECK(w.sum() == doctest::Approx(2.0));
}

TEST_CASE("cost parameter validation")
{
    CHECK_NOTHROW(CostParams{}.validate());
    CostParams c;
    c.eta = 0.0;
    CHECK_THROWS_AS(c.validate(), DomainError);
    c = CostParams{};
    c.c1 = -1.0;
    CHECK_THROWS_AS(c.validate(), DomainError);
    c = CostParams{};
    c.z_min = 1e-2;
    CHECK_THROWS_AS(c.validate(), DomainError);
}

TEST_CASE("cost functional on simple fields")
{
    const SpatialGrid grid(10);
    CostParams costs;
    StateField s;
    s.times = Vector::LinSpaced(401, 0.0, 400.0);
    s.z = Matrix::Zero(401, 10);
    s.r = Matrix::Zero(401, 10);
    const ControlField zero = ControlField::constant(ControlKind::TimeOnly, 0.0, 1.0, 401, 10);

    // only the capacity term survives: omega/2 * c2 * T * psi(-z_max)
    const CostBreakdown b = cost_breakdown(s, zero, costs, grid);
    CHECK(b.infected == 0.0);
    CHECK(b.control == 0.0);
    CHECK(b.capacity == doctest::Approx(0.5 * costs.c2 * 400.0 * psi(-costs.z_max)).epsilon(1e-12));
    CHECK(b.capacity < 0.02);

    // a constant state and control, by hand
    s.z.setConstant(1e-3);
    const ControlField half = ControlField::constant(ControlKind::TimeOnly, 0.5, 1.0, 401, 10);
    const double d = 1.0 + 0.5 * costs.c1 * psi(costs.z_min - 1e-3);
    const double expected = 400.0 * 1e-3 + 0.5 * costs.eta * 400.0 * 0.25 * d
        + 0.5 * costs.omega * costs.c2 * 400.0 * psi(1e-3 - costs.z_max);
    CHECK(cost_functional(s, half, costs, grid) == doctest::Approx(expected).epsilon(1e-12));

    // time-only and space-time scoring agree on the same values
    const ControlField dense = ControlField::constant(ControlKind::SpaceTime, 0.5, 1.0, 401, 10);
    CHECK(cost_functional(s, dense, costs, grid) == doctest::Approx(expected).epsilon(1e-12));

    const ControlField wrong = ControlField::constant(ControlKind::TimeOnly, 0.0, 1.0, 400, 10);
    CHECK_THROWS_AS(cost_functional(s, wrong, costs, SpatialGrid(10)), DimensionError);
    CHECK_THROWS_AS(cost_functional(s, zero, costs, SpatialGrid(11)), DimensionError);
}

TEST_CASE("uncontrolled target values")
{
    const SpatialGrid grid(100);
    const KernelMatrix kernel(KernelSpec{}, grid);
    auto J0 = [&](const InitialCondition& ic, double T, double eta, double omega) {
        CostParams costs;
        costs.eta = eta;
        costs.omega = omega;
        const ControlField u = ControlField::constant(ControlKind::TimeOnly, 0.0, 0.25, step_count(T, 0.25) + 1, 100);
        return cost_functional(integrate_forward(ic, u, EpidemicParams{}, kernel, T, 0.25), u, costs, grid);
    };
    CHECK(J0(InitialCondition::uniform(100, 2e-5), 400.0, 0.02, 1.0) == doctest::Approx(132.4).epsilon(0.05));
    CHECK(J0(InitialCondition::uniform(100, 2e-5), 800.0, 0.005, 0.2) == doctest::Approx(32.9).epsilon(0.05));
}

TEST_CASE("adjoint terminal condition and closed form")
{
    // no dynamics and no penalties: lambda1' = -1, so lambda1 = T - t
    const SpatialGrid grid(8);
    const KernelMatrix none(KernelSpec{0.0, 1.0, 0.0}, grid);
    EpidemicParams frozen{0.1, 0.0};
    CostParams costs;
    costs.c1 = 0.0;
    costs.c2 = 0.0;
    const double T = 20.0, dt = 0.5;
    StateField s;
    s.times = Vector::LinSpaced(41, 0.0, T);
    s.z = Matrix::Constant(41, 8, 0.01);
    s.r = Matrix::Constant(41, 8, 0.2);
    const ControlField u = ControlField::constant(ControlKind::SpaceTime, 0.3, dt, 41, 8);
    const AdjointField adj = integrate_adjoint_backward(s, u, frozen, none, costs);
    for (Eigen::Index m = 0; m < 41; ++m) {
        for (Eigen::Index i = 0; i < 8; ++i) {
            CHECK(adj.lambda1(m, i) == doctest::Approx(T - s.times[m]).epsilon(1e-12));
            CHECK(adj.lambda2(m, i) == 0.0);
        }
    }

    // terminal values are exactly zero in a real run too
    Coarse c;
    const ControlField half = ControlField::constant(ControlKind::TimeOnly, 0.5, 1.0, 41, 20);
    const StateField st = integrate_forward(c.ic, half, c.params, c.kernel, c.T, c.dt);
    const AdjointField a = integrate_adjoint_backward(st, half, c.params, c.kernel, c.costs);
    CHECK(a.lambda1.row(40).isZero(0.0));
    CHECK(a.lambda2.row(40).isZero(0.0));
    CHECK(a.drive.row(40).isZero(0.0));
}

TEST_CASE("gradient oracle on the coarse instance")
{
    Coarse c;
    std::mt19937_64 rng(2024);

    SUBCASE("time-only")
    {
        const ControlField base = ControlField::time_only(random_matrix(41, 1, 0.2, 0.8, rng).col(0), 1.0, 20);
        CHECK(gradient_check(c, base, rng) < 1e-3);
    }
    SUBCASE("space-time")
    {
        const ControlField base = ControlField::space_time(random_matrix(41, 20, 0.2, 0.8, rng), 1.0);
        CHECK(gradient_check(c, base, rng) < 1e-3);
    }
    SUBCASE("piecewise constant")
    {
        const ControlField base = ControlField::piecewise(random_matrix(4, 4, 0.2, 0.8, rng), 1.0, 10, 5, 41, 20);
        CHECK(gradient_check(c, base, rng) < 1e-3);
    }
}

TEST_CASE("control updates vanish without drive or infection")
{
    Coarse c;
    const ControlField half = ControlField::constant(ControlKind::SpaceTime, 0.5, 1.0, 41, 20);
    const StateField st = integrate_forward(c.ic, half, c.params, c.kernel, c.T, c.dt);

    AdjointField zero{Matrix::Zero(41, 20), Matrix::Zero(41, 20), Matrix::Zero(41, 20)};
    CHECK(control_update_time(st, zero, c.costs, c.grid).isZero(0.0));
    CHECK(control_update_spacetime(st, zero, c.costs).isZero(0.0));

    const InitialCondition none = InitialCondition::uniform(20, 0.0);
    const StateField flat = integrate_forward(none, half, c.params, c.kernel, c.T, c.dt);
    const AdjointField adj = integrate_adjoint_backward(flat, half, c.params, c.kernel, c.costs);
    CHECK(control_update_time(flat, adj, c.costs, c.grid).isZero(0.0));
    CHECK(control_update_spacetime(flat, adj, c.costs).isZero(0.0));

    // mirror-symmetric state gives a mirror-symmetric update
    const StateField sym = integrate_forward(InitialCondition::uniform(20, 3e-3), half, c.params, c.kernel, c.T, c.dt);
    const AdjointField as = integrate_adjoint_backward(sym, half, c.params, c.kernel, c.costs);
    const Matrix us = control_update_spacetime(sym, as, c.costs);
    CHECK((us - us.rowwise().reverse()).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(us.minCoeff() >= 0.0);
    CHECK(us.maxCoeff() <= 1.0);
}

TEST_CASE("piecewise projection")
{
    const double dt = 0.25;
    const std::size_t nt = 1601; // T = 400
    const SpatialGrid grid(100);

    const ControlField c = project_piecewise(Matrix::Constant(nt, 100, 0.37), dt, 10.0, 10);
    CHECK((c.dense().array() - 0.37).abs().maxCoeff() < 1e-15);

    // linear in time (scaled by 1/1000 to stay in [0,1]): block i takes
    // the value at its start time 10 (i - 1)
    Matrix lin(nt, 100);
    for (std::size_t n = 0; n < nt; ++n) {
        lin.row(static_cast<Eigen::Index>(n)).setConstant(static_cast<double>(n) * dt / 1000.0);
    }
    const ControlField pl = project_piecewise(lin, dt, 10.0, 10);
    CHECK(pl.dofs().rows() == 40);
    for (Eigen::Index i = 0; i < 40; ++i) {
        CHECK(pl.dofs()(i, 3) == doctest::Approx(10.0 * static_cast<double>(i) / 1000.0));
    }

    // linear in space, one time block, blocks of 10 cells: block means
    Matrix xs(41, 100);
    for (Eigen::Index n = 0; n < 41; ++n) {
        xs.row(n) = grid.nodes().transpose();
    }
    const ControlField px = project_piecewise(xs, 1.0, 40.0, 10);
    CHECK(px.dofs().rows() == 1);
    for (Eigen::Index j = 0; j < 10; ++j) {
        CHECK(px.dofs()(0, j) == doctest::Approx(0.05 + 0.1 * static_cast<double>(j)).epsilon(1e-12));
    }

    // idempotent
    std::mt19937_64 rng(5);
    const ControlField once = project_piecewise(random_matrix(nt, 100, 0.0, 1.0, rng), dt, 10.0, 10);
    const ControlField twice = project_piecewise(once, 10.0, 10);
    CHECK(once.dofs() == twice.dofs());

    CHECK_THROWS_AS(project_piecewise(lin, dt, 30.0, 10), ConfigError);
    CHECK_THROWS_AS(project_piecewise(lin, dt, 10.0, 7), ConfigError);
    CHECK_THROWS_AS(project_piecewise(lin, dt, 0.1, 10), ConfigError);
}

TEST_CASE("sweep configuration")
{
    CHECK_NOTHROW(SweepConfig{}.validate());
    CHECK_THROWS_AS((SweepConfig{0.0}.validate()), DomainError);
    CHECK_THROWS_AS((SweepConfig{1.5}.validate()), DomainError);
    CHECK_THROWS_AS((SweepConfig{0.1, 0.0}.validate()), DomainError);
    CHECK_THROWS_AS((SweepConfig{0.1, 1e-4, 0}.validate()), DomainError);
    CHECK_THROWS_AS((SweepConfig{0.1, 1e-4, 10, 2.0}.validate()), DomainError);
    CHECK_THROWS_AS((SweepConfig{0.1, 1e-4, 10, 0.5, 0.5}.validate()), DomainError);
    CHECK(to_string(SweepStatus::Stalled) == "stalled");
}

TEST_CASE("sweep with no infection")
{
    ControlProblem p = small_problem(ControlKind::TimeOnly);
    p.ic = InitialCondition::uniform(20, 0.0);

    SweepConfig from_zero;
    from_zero.u_init = 0.0;
    const SweepResult a = fbs_solve(p, from_zero);
    CHECK(a.converged());
    CHECK(a.control.dofs().isZero(0.0));

    // from the default start the relaxation decays u geometrically
    const SweepResult b = fbs_solve(p, SweepConfig{});
    CHECK(b.converged());
    CHECK(b.control.max() < 1e-3);
    CHECK(b.J() < b.j_log.front());
}

TEST_CASE("sweep descent, feasibility and determinism")
{
    for (ControlKind kind : {ControlKind::TimeOnly, ControlKind::SpaceTime, ControlKind::PiecewiseConstant}) {
        CAPTURE(to_string(kind));
        const ControlProblem p = small_problem(kind);
        SweepConfig cfg;
        cfg.max_iter = 60;
        const SweepResult r = fbs_solve(p, cfg);
        CHECK(r.control.min() >= 0.0);
        CHECK(r.control.max() <= 1.0);
        CHECK(r.control.kind() == kind);
        CHECK(r.j_log.size() == r.iterations + 1);
        for (std::size_t k = 1; k < r.j_log.size(); ++k) {
            CHECK(r.j_log[k] <= r.j_log[k - 1]);
        }
        CHECK(r.J() < r.j_log.front());
        CHECK(r.adjoint.lambda1.rows() == 61);

        const SweepResult again = fbs_solve(p, cfg);
        CHECK(again.j_log == r.j_log);
        CHECK(again.control.dofs() == r.control.dofs());
    }

    // a piecewise iterate stays constant on its blocks
    const SweepResult pw = fbs_solve(small_problem(ControlKind::PiecewiseConstant), SweepConfig{0.1, 1e-4, 20});
    const Matrix d = pw.control.dense();
    CHECK(d(0, 0) == d(9, 4));
    CHECK(d(10, 5) == d(19, 9));
}
