#pragma once

#include <cstddef>
#include <optional>
#include <string>

#include "idsir/grid_kernel.hpp"
#include "idsir/sir_forward.hpp"
#include "idsir/types.hpp"

namespace idsir {

struct FixedPointConfig {
    std::size_t max_iter = 10000;
    double tol = 1e-12; ///< sup-norm between successive iterates
    /// Default: constant (K - 1)/K when K > 1, else 0.5.
    std::optional<Vector> initial_guess;
};

/// chi[z](x) = int z(y) k(|x - y|) dy.
Vector chi(const Vector& z, const KernelMatrix& kernel);
/// Phi[z] = chi[z] / (1 + chi[z]), the fixed-point form of z = (1 - z) chi[z].
Vector sis_map(const Vector& z, const KernelMatrix& kernel);

struct SisEquilibrium {
    Vector z_star;
    std::size_t iterations = 0;
    double residual = 0.0; ///< ||z - Phi[z]||_inf
    bool converged = false;
    double k1 = 0.0;
    double K = 0.0;
    double lower_bound = 0.0; ///< (k1 - 1)/k1
    double upper_bound = 0.0; ///< (K - 1)/K
    bool bounds_ok = false;   ///< a-priori bounds hold (trivially true for z = 0)
    bool symmetric_ok = false;
    bool dichotomy_ok = false; ///< z = 0 everywhere or z > 0 everywhere
    double contraction_constant = 0.0; ///< K / k1^2
};

/// Picard iteration z <- Phi[z] (beta = gamma = 1). Non-convergence is
/// reported through `converged`, with the last iterate kept.
SisEquilibrium sis_fixed_point(const KernelMatrix& kernel, const FixedPointConfig& cfg = {});

struct PrevalenceSolution {
    Vector r_inf;
    Vector s_inf;
    double residual = 0.0;
    std::size_t iterations = 0;
    bool converged = false;
};

/// Solves r = 1 - exp(-(beta/gamma) T_k r) by Picard iteration from r = 0.99.
/// When (beta/gamma) ||T_k|| <= 1 (up to 1e-9 relative) only the zero solution exists and it is
/// returned directly.
PrevalenceSolution sir_prevalence(const KernelMatrix& kernel, const EpidemicParams& params,
                                  const FixedPointConfig& cfg = {});

struct ThresholdReport {
    double k1 = 0.0;
    double K = 0.0;
    double op_norm = 0.0;
    double r0 = 0.0; ///< (beta/gamma) op_norm
    double contraction_constant = 0.0;
    bool supercritical = false;     ///< r0 >= 1: unique nonzero prevalence
    bool contraction_regime = false; ///< K/k1^2 < 1: Banach fixed point for SIS
    bool schauder_existence = false; ///< K > 1 and k1 > 1: SIS existence
    std::string regime;
};

ThresholdReport threshold_report(const KernelSpec& spec, const EpidemicParams& params,
                                 const SpatialGrid& grid);

} // namespace idsir
