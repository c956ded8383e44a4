#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "idsir/types.hpp"

namespace idsir {

/// Uniform cell-centred grid on [0,1]. Node i sits at (i + 1/2)/n and carries
/// quadrature weight 1/n.
class SpatialGrid {
public:
    explicit SpatialGrid(std::size_t n_points = 100);

    std::size_t size() const { return nodes_.size(); }
    double spacing() const { return spacing_; }
    double node(std::size_t i) const { return nodes_[static_cast<Eigen::Index>(i)]; }
    const Vector& nodes() const { return nodes_; }
    const Vector& weights() const { return weights_; }

    /// Quadrature of a grid function over [0,1].
    double integrate(const Eigen::Ref<const Vector>& f) const;

    bool operator==(const SpatialGrid& other) const { return size() == other.size(); }

private:
    double spacing_;
    Vector nodes_;
    Vector weights_;
};

/// Interaction kernel k(r; u) = (1 - u) * c * exp(-delta * r) + k0.
struct KernelSpec {
    double c = 50.0;     ///< amplitude of the distance-dependent part
    double delta = 50.0; ///< decay rate
    double k0 = 0.0;     ///< background part, not affected by the control

    /// Distance-dependent part a(r) = c exp(-delta r).
    double adjustable(double r) const;
    /// Exact integral of a(s) over s in [lo, hi], 0 <= lo <= hi.
    double adjustable_integral(double lo, double hi) const;

    static KernelSpec constant(double value) { return {0.0, 1.0, value}; }
};

/// Evaluates k(r; u). Throws DomainError for r < 0 or u outside [0,1].
double kernel_value(const KernelSpec& spec, double r, double u);

/// Nyström discretization of T_k on a SpatialGrid.
///
/// The density is piecewise constant on the grid cells; the kernel is
/// integrated exactly over each cell, so entry (i,j) is
/// w_j * (cell average of k(|x_i - y|) over cell j). Because the grid is
/// uniform the matrix is symmetric Toeplitz.
class KernelMatrix {
public:
    KernelMatrix(const KernelSpec& spec, const SpatialGrid& grid);

    const KernelSpec& spec() const { return spec_; }
    const SpatialGrid& grid() const { return grid_; }
    std::size_t size() const { return grid_.size(); }

    /// Weighted adjustable part, A_ij = w_j * avg_{cell j} a(|x_i - y|).
    const Matrix& adjustable() const { return adjustable_; }
    /// Full weighted matrix for a spatially uniform control value u.
    Matrix values(double u = 0.0) const;

    /// chi_i = (1 - u_i) (A z)_i + k0 * sum_j w_j z_j. Also returns A z, which
    /// the adjoint and control updates need.
    void apply(const Vector& z, const Vector& u, Vector& chi, Vector& az) const;
    /// Same with a spatially uniform control.
    void apply(const Vector& z, double u, Vector& chi, Vector& az) const;
    /// Transposed operator: out_j = sum_i (1 - u_i) A_ij v_i + k0 w_j sum_i v_i.
    void apply_transpose(const Vector& v, const Vector& u, Vector& out) const;

private:
    KernelSpec spec_;
    SpatialGrid grid_;
    Matrix adjustable_;
};

struct KernelNorms {
    double k1 = 0.0;      ///< one-sided L1 norm, integral of k(r) over [0,1]
    double K = 0.0;       ///< max_x integral of k(|x - y|) dy
    double op_norm = 0.0; ///< L2 operator norm of T_k
    double l2_norm = 0.0; ///< function L2 norm of k(r) on [0,1], kept for reference
};

struct PowerIterationResult {
    double value = 0.0;
    std::size_t iterations = 0;
    bool converged = false;
};

/// Largest eigenvalue of D^{1/2} M D^{1/2} (D = quadrature weights), i.e. the
/// operator norm of the Nyström operator for symmetric nonnegative kernels.
/// Deterministic all-ones start vector.
PowerIterationResult operator_norm(const Matrix& weighted, const Vector& weights,
                                   double rel_tol = 1e-8, std::size_t max_iter = 100000);

KernelNorms compute_norms(const KernelSpec& spec, const SpatialGrid& grid);

/// R0 = (beta / gamma) * ||T_k||.
double basic_reproduction_number(const KernelSpec& spec, double beta, double gamma,
                                 const SpatialGrid& grid);

struct AssumptionCheck {
    std::string name;
    bool passed = false;
    std::string detail;
};

struct ValidationReport {
    std::vector<AssumptionCheck> checks;

    bool all_passed() const;
    /// Throws std::out_of_range for unknown names.
    const AssumptionCheck& at(std::string_view name) const;
};

/// Checks continuity, non-negativity, k(0) > k(r) > 0, monotonicity on the
/// grid, k1 > 0 and k1 < K. Never throws; failures carry the offending values.
ValidationReport validate_assumptions(const KernelSpec& spec, const SpatialGrid& grid);

} // namespace idsir
