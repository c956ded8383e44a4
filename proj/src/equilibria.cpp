#include "idsir/equilibria.hpp"

#include <cmath>

namespace idsir {

Vector chi(const Vector& z, const KernelMatrix& kernel)
{
    if (static_cast<std::size_t>(z.size()) != kernel.size()) {
        throw DimensionError("chi: size mismatch");
    }
    Vector out, az;
    kernel.apply(z, 0.0, out, az);
    return out;
}

Vector sis_map(const Vector& z, const KernelMatrix& kernel)
{
    const Vector c = chi(z, kernel);
    return c.array() / (1.0 + c.array());
}

SisEquilibrium sis_fixed_point(const KernelMatrix& kernel, const FixedPointConfig& cfg)
{
    if (!(cfg.tol > 0.0)) {
        throw DomainError("sis_fixed_point: tol must be positive");
    }
    const auto n = static_cast<Eigen::Index>(kernel.size());
    const KernelNorms norms = compute_norms(kernel.spec(), kernel.grid());

    SisEquilibrium out;
    out.k1 = norms.k1;
    out.K = norms.K;
    out.lower_bound = (norms.k1 - 1.0) / norms.k1;
    out.upper_bound = (norms.K - 1.0) / norms.K;
    out.contraction_constant = norms.K / (norms.k1 * norms.k1);

    Vector z = cfg.initial_guess.value_or(
        Vector::Constant(n, norms.K > 1.0 ? (norms.K - 1.0) / norms.K : 0.5));
    if (z.size() != n) {
        throw DimensionError("sis_fixed_point: initial guess has wrong size");
    }

    for (std::size_t it = 1; it <= cfg.max_iter; ++it) {
        Vector next = sis_map(z, kernel);
        const double change = (next - z).cwiseAbs().maxCoeff();
        z.swap(next);
        out.iterations = it;
        if (change <= cfg.tol) {
            out.converged = true;
            break;
        }
    }
    out.z_star = z;
    out.residual = (z - sis_map(z, kernel)).cwiseAbs().maxCoeff();

    const double slack = 1e-12;
    const bool trivial = z.cwiseAbs().maxCoeff() <= cfg.tol;
    out.dichotomy_ok = trivial || z.minCoeff() > 0.0;
    out.bounds_ok = trivial
        || (z.maxCoeff() <= out.upper_bound + slack
            && (norms.k1 <= 1.0 || z.minCoeff() >= out.lower_bound - slack));
    out.symmetric_ok = (z - z.reverse()).cwiseAbs().maxCoeff() <= 1e-8;
    return out;
}

PrevalenceSolution sir_prevalence(const KernelMatrix& kernel, const EpidemicParams& params,
                                  const FixedPointConfig& cfg)
{
    params.validate();
    const auto n = static_cast<Eigen::Index>(kernel.size());
    const double ratio = params.beta / params.gamma;

    PrevalenceSolution out;
    const double op = operator_norm(kernel.values(0.0), kernel.grid().weights()).value;
    // at criticality only the zero solution exists, but Picard approaches it
    // like 1/k; the slack absorbs rounding in the power iteration
    if (ratio * op <= 1.0 + 1e-9) {
        out.r_inf = Vector::Zero(n);
        out.s_inf = Vector::Ones(n);
        out.converged = true;
        return out;
    }

    auto update = [&](const Vector& r) -> Vector {
        return 1.0 - (-ratio * chi(r, kernel).array()).exp();
    };

    Vector r = Vector::Constant(n, 0.99);
    for (std::size_t it = 1; it <= cfg.max_iter; ++it) {
        Vector next = update(r);
        const double change = (next - r).cwiseAbs().maxCoeff();
        r.swap(next);
        out.iterations = it;
        if (change <= cfg.tol) {
            out.converged = true;
            break;
        }
    }
    out.residual = (r - update(r)).cwiseAbs().maxCoeff();
    out.r_inf = r;
    out.s_inf = 1.0 - r.array();
    return out;
}

ThresholdReport threshold_report(const KernelSpec& spec, const EpidemicParams& params,
                                 const SpatialGrid& grid)
{
    params.validate();
    const KernelNorms norms = compute_norms(spec, grid);
    ThresholdReport out;
    out.k1 = norms.k1;
    out.K = norms.K;
    out.op_norm = norms.op_norm;
    out.r0 = params.beta / params.gamma * norms.op_norm;
    out.contraction_constant = norms.K / (norms.k1 * norms.k1);
    out.supercritical = out.r0 >= 1.0;
    out.contraction_regime = out.contraction_constant < 1.0;
    out.schauder_existence = norms.K > 1.0 && norms.k1 > 1.0;
    out.regime = out.supercritical ? "endemic (unique nonzero prevalence)" : "disease-free only";
    return out;
}

} // namespace idsir
