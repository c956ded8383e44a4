#pragma once

// Stage-level pieces of the RK4 step shared by the forward solver and its
// discrete adjoint.

#include <array>

#include "idsir/grid_kernel.hpp"
#include "idsir/sir_forward.hpp"

namespace idsir::detail {

class Dynamics {
public:
    Dynamics(const KernelMatrix& kernel, const EpidemicParams& params)
        : kernel_(kernel), beta_(params.beta), gamma_(params.gamma)
    {
    }

    const KernelMatrix& kernel() const { return kernel_; }

    void rhs(const Vector& z, const Vector& r, const Vector& u, Vector& chi, Vector& az,
             Vector& dz, Vector& dr) const
    {
        kernel_.apply(z, u, chi, az);
        dz = beta_ * (1.0 - z.array() - r.array()) * chi.array() - gamma_ * z.array();
        dr = gamma_ * z;
    }

    /// Accumulates (df/dy)^T (vz, vr) into (gz, gr) and (df/du)^T (vz, vr)
    /// into gu, at the stage point (z, r) with cached chi = K_u z, az = A z.
    void vjp(const Vector& z, const Vector& r, const Vector& u, const Vector& chi,
             const Vector& az, const Vector& vz, const Vector& vr, Vector& gz, Vector& gr,
             Vector& gu, Vector& scratch_in, Vector& scratch_out) const
    {
        scratch_in = beta_ * (1.0 - z.array() - r.array()) * vz.array();
        kernel_.apply_transpose(scratch_in, u, scratch_out);
        const auto local = (beta_ * chi.array() * vz.array()).eval();
        gz.array() += scratch_out.array() - local - gamma_ * vz.array() + gamma_ * vr.array();
        gr.array() -= local;
        gu.array() -= scratch_in.array() * az.array();
    }

private:
    const KernelMatrix& kernel_;
    double beta_;
    double gamma_;
};

/// Stage data of one RK4 step y -> y + dt/6 (k1 + 2 k2 + 2 k3 + k4).
struct Rk4Stages {
    std::array<Vector, 4> z, r, chi, az, kz, kr;

    explicit Rk4Stages(Eigen::Index n)
    {
        for (int s = 0; s < 4; ++s) {
            z[s].resize(n);
            r[s].resize(n);
            chi[s].resize(n);
            az[s].resize(n);
            kz[s].resize(n);
            kr[s].resize(n);
        }
    }

    void evaluate(const Dynamics& dyn, const Vector& z0, const Vector& r0, const Vector& u,
                  double dt)
    {
        static constexpr std::array<double, 4> offset{0.0, 0.5, 0.5, 1.0};
        z[0] = z0;
        r[0] = r0;
        for (int s = 0; s < 4; ++s) {
            if (s > 0) {
                z[s] = z0 + offset[s] * dt * kz[s - 1];
                r[s] = r0 + offset[s] * dt * kr[s - 1];
            }
            dyn.rhs(z[s], r[s], u, chi[s], az[s], kz[s], kr[s]);
        }
    }

    void combine(const Vector& z0, const Vector& r0, double dt, Vector& z1, Vector& r1) const
    {
        z1 = z0 + dt / 6.0 * (kz[0] + 2.0 * kz[1] + 2.0 * kz[2] + kz[3]);
        r1 = r0 + dt / 6.0 * (kr[0] + 2.0 * kr[1] + 2.0 * kr[2] + kr[3]);
    }
};

} // namespace idsir::detail
