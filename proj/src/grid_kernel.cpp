#include "idsir/grid_kernel.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace idsir {

SpatialGrid::SpatialGrid(std::size_t n_points)
{
    if (n_points == 0) {
        throw DomainError("SpatialGrid: n_points must be positive");
    }
    const auto n = static_cast<Eigen::Index>(n_points);
    spacing_ = 1.0 / static_cast<double>(n_points);
    nodes_.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        nodes_[i] = (static_cast<double>(i) + 0.5) * spacing_;
    }
    weights_ = Vector::Constant(n, spacing_);
}

double SpatialGrid::integrate(const Eigen::Ref<const Vector>& f) const
{
    if (f.size() != nodes_.size()) {
        throw DimensionError("SpatialGrid::integrate: size mismatch");
    }
    return weights_.dot(f);
}

double KernelSpec::adjustable(double r) const
{
    return c * std::exp(-delta * r);
}

double KernelSpec::adjustable_integral(double lo, double hi) const
{
    if (delta == 0.0) {
        return c * (hi - lo);
    }
    // c/delta * (e^{-delta lo} - e^{-delta hi}) without cancellation
    return -c / delta * std::exp(-delta * lo) * std::expm1(-delta * (hi - lo));
}

double kernel_value(const KernelSpec& spec, double r, double u)
{
    if (!(r >= 0.0)) {
        throw DomainError("kernel_value: distance must be non-negative");
    }
    if (!(u >= 0.0 && u <= 1.0)) {
        throw DomainError("kernel_value: control must lie in [0,1]");
    }
    return (1.0 - u) * spec.adjustable(r) + spec.k0;
}

KernelMatrix::KernelMatrix(const KernelSpec& spec, const SpatialGrid& grid)
    : spec_(spec), grid_(grid)
{
    const auto n = static_cast<Eigen::Index>(grid.size());
    const double h = grid.spacing();

    // Toeplitz: entry depends on |i - j| only.
    Vector band(n);
    band[0] = 2.0 * spec.adjustable_integral(0.0, 0.5 * h);
    for (Eigen::Index m = 1; m < n; ++m) {
        const double d = static_cast<double>(m) * h;
        band[m] = spec.adjustable_integral(d - 0.5 * h, d + 0.5 * h);
    }

    adjustable_.resize(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            adjustable_(i, j) = band[std::abs(i - j)];
        }
    }
}

Matrix KernelMatrix::values(double u) const
{
    Matrix out = (1.0 - u) * adjustable_;
    const Vector& w = grid_.weights();
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
        out.row(i) += spec_.k0 * w.transpose();
    }
    return out;
}

namespace {

void check_size(const Vector& v, std::size_t n, const char* what)
{
    if (static_cast<std::size_t>(v.size()) != n) {
        throw DimensionError(std::string("KernelMatrix: ") + what + " has wrong size");
    }
}

} // namespace

void KernelMatrix::apply(const Vector& z, const Vector& u, Vector& chi, Vector& az) const
{
    check_size(z, size(), "z");
    check_size(u, size(), "u");
    az.noalias() = adjustable_ * z;
    const double background = spec_.k0 * grid_.weights().dot(z);
    chi = (1.0 - u.array()) * az.array() + background;
}

void KernelMatrix::apply(const Vector& z, double u, Vector& chi, Vector& az) const
{
    check_size(z, size(), "z");
    az.noalias() = adjustable_ * z;
    const double background = spec_.k0 * grid_.weights().dot(z);
    chi = ((1.0 - u) * az.array()) + background;
}

void KernelMatrix::apply_transpose(const Vector& v, const Vector& u, Vector& out) const
{
    check_size(v, size(), "v");
    check_size(u, size(), "u");
    const Vector scaled = (1.0 - u.array()) * v.array();
    out.noalias() = adjustable_.transpose() * scaled;
    out += (spec_.k0 * v.sum()) * grid_.weights();
}

PowerIterationResult operator_norm(const Matrix& weighted, const Vector& weights,
                                   double rel_tol, std::size_t max_iter)
{
    const auto n = weighted.rows();
    if (weighted.cols() != n || weights.size() != n) {
        throw DimensionError("operator_norm: matrix and weights must agree");
    }
    // S = D^{1/2} M D^{-1/2} is symmetric when M_ij = k_ij w_j with k symmetric.
    const Vector sqrt_w = weights.array().sqrt();
    const Matrix sym = sqrt_w.asDiagonal() * weighted * sqrt_w.cwiseInverse().asDiagonal();

    PowerIterationResult result;
    Vector v = Vector::Ones(n).normalized();
    Vector sv(n);
    double previous = 0.0;
    for (std::size_t it = 1; it <= max_iter; ++it) {
        sv.noalias() = sym * v;
        const double rayleigh = v.dot(sv);
        const double norm = sv.norm();
        result.iterations = it;
        if (norm == 0.0) {
            result.value = 0.0;
            result.converged = true;
            return result;
        }
        result.value = rayleigh;
        v = sv / norm;
        if (it > 1 && std::abs(rayleigh - previous) <= rel_tol * std::abs(rayleigh)) {
            result.converged = true;
            return result;
        }
        previous = rayleigh;
    }
    return result;
}

KernelNorms compute_norms(const KernelSpec& spec, const SpatialGrid& grid)
{
    const KernelMatrix kernel(spec, grid);
    const Matrix full = kernel.values(0.0);

    KernelNorms norms;
    norms.k1 = spec.adjustable_integral(0.0, 1.0) + spec.k0;
    norms.K = full.rowwise().sum().maxCoeff();
    norms.op_norm = operator_norm(full, grid.weights()).value;

    double sq = spec.k0 * spec.k0;
    if (spec.delta != 0.0) {
        sq += spec.c * spec.c * -std::expm1(-2.0 * spec.delta) / (2.0 * spec.delta);
        sq += 2.0 * spec.c * spec.k0 * -std::expm1(-spec.delta) / spec.delta;
    } else {
        sq += spec.c * spec.c + 2.0 * spec.c * spec.k0;
    }
    norms.l2_norm = std::sqrt(std::max(sq, 0.0));
    return norms;
}

double basic_reproduction_number(const KernelSpec& spec, double beta, double gamma,
                                 const SpatialGrid& grid)
{
    if (!(gamma > 0.0)) {
        throw DomainError("basic_reproduction_number: gamma must be positive");
    }
    return beta / gamma * compute_norms(spec, grid).op_norm;
}

bool ValidationReport::all_passed() const
{
    return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed; });
}

const AssumptionCheck& ValidationReport::at(std::string_view name) const
{
    for (const auto& check : checks) {
        if (check.name == name) {
            return check;
        }
    }
    throw std::out_of_range("ValidationReport: no check named " + std::string(name));
}

namespace {

// Exact row integral of k(|x - y|) over y in [0,1].
double row_integral(const KernelSpec& spec, double x)
{
    return spec.adjustable_integral(0.0, x) + spec.adjustable_integral(0.0, 1.0 - x) + spec.k0;
}

std::string describe(double r, double value)
{
    std::ostringstream os;
    os.precision(17);
    os << "k(" << r << ") = " << value;
    return os.str();
}

} // namespace

ValidationReport validate_assumptions(const KernelSpec& spec, const SpatialGrid& grid)
{
    ValidationReport report;
    const std::size_t n = grid.size();
    const double h = grid.spacing();
    auto k = [&](double r) { return spec.adjustable(r) + spec.k0; };

    std::vector<double> distances;
    distances.reserve(n + 1);
    for (std::size_t m = 0; m <= n; ++m) {
        distances.push_back(std::min(1.0, static_cast<double>(m) * h));
    }

    {
        const bool finite = std::isfinite(spec.c) && std::isfinite(spec.delta)
            && std::isfinite(spec.k0);
        report.checks.push_back({"continuous", finite, finite ? "" : "non-finite parameter"});
    }
    {
        AssumptionCheck check{"non_negative", true, ""};
        for (double r : distances) {
            if (k(r) < 0.0) {
                check.passed = false;
                check.detail = describe(r, k(r));
                break;
            }
        }
        report.checks.push_back(check);
    }
    {
        // k(0) > k(r) > 0 for r > 0
        AssumptionCheck check{"strict_maximum_at_zero", true, ""};
        const double k_zero = k(0.0);
        for (std::size_t m = 1; m < distances.size(); ++m) {
            const double value = k(distances[m]);
            if (!(value > 0.0 && value < k_zero)) {
                check.passed = false;
                check.detail = describe(distances[m], value) + ", " + describe(0.0, k_zero);
                break;
            }
        }
        report.checks.push_back(check);
    }
    {
        AssumptionCheck check{"monotone_decreasing", true, ""};
        for (std::size_t m = 1; m < distances.size(); ++m) {
            if (k(distances[m]) > k(distances[m - 1])) {
                check.passed = false;
                check.detail = describe(distances[m - 1], k(distances[m - 1])) + " < "
                    + describe(distances[m], k(distances[m]));
                break;
            }
        }
        report.checks.push_back(check);
    }

    const double k1 = spec.adjustable_integral(0.0, 1.0) + spec.k0;
    double K = std::max(row_integral(spec, 0.0), row_integral(spec, 0.5));
    for (std::size_t i = 0; i < n; ++i) {
        K = std::max(K, row_integral(spec, grid.node(i)));
    }
    {
        std::ostringstream os;
        os.precision(17);
        os << "k1 = " << k1;
        report.checks.push_back({"k1_positive", k1 > 0.0, os.str()});
    }
    {
        std::ostringstream os;
        os.precision(17);
        os << "k1 = " << k1 << ", K = " << K;
        report.checks.push_back({"k1_below_K", k1 < K, os.str()});
    }
    return report;
}

} // namespace idsir
