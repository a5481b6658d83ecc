#pragma once

#include <functional>

#include "volimm/projection.hpp"

namespace volimm {

// Velocity field on the flat torus, means (harmonic part) carried in the
// (0,0) modes of the grids.
struct VelocityField2D {
    ScalarField u, v;

    const ParamGrid& grid() const { return u.grid(); }
};

struct VorticityField {
    explicit VorticityField(ScalarField w, double mean_u = 0.0, double mean_v = 0.0)
        : omega(std::move(w)), mean_u(mean_u), mean_v(mean_v) {
        if (omega.grid().dim() != 2) throw RangeError("vorticity lives on a 2D torus grid");
        initial_mean = mean_of(omega);
    }

    static double mean_of(const ScalarField& f) {
        double m = 0.0;
        for (double t : f) m += t;
        return m / f.size();
    }

    ScalarField omega;
    double mean_u, mean_v;   // harmonic part of the velocity, constant in time
    double initial_mean;     // int omega is conserved; pinned after each step
};

namespace euler_detail {

template <typename F>
inline void for_each_k(const ParamGrid& g, F&& fn) {
    const double s1 = 2.0 * std::numbers::pi / g.period(0);
    const double s2 = 2.0 * std::numbers::pi / g.period(1);
    spectral::for_each_mode(g, [&](std::size_t idx, int f1, int f2, bool nyq1, bool nyq2) {
        fn(idx, f1 * s1, f2 * s2, nyq1 || nyq2);
    });
}

} // namespace euler_detail

// Divergence du/dx + dv/dy (flat metric, spectral).
inline ScalarField divergence(const VelocityField2D& w) {
    ScalarField out = spectral::derivative(w.u, 0, 1);
    axpy(1.0, spectral::derivative(w.v, 1, 1), out);
    return out;
}

// Helmholtz-Hodge/Leray projection onto divergence-free fields; the mean
// momentum (harmonic part) passes through untouched.
inline VelocityField2D leray_project(const VelocityField2D& w) {
    const ParamGrid& g = w.grid();
    auto su = spectral::forward(w.u);
    auto sv = spectral::forward(w.v);
    euler_detail::for_each_k(g, [&](std::size_t idx, double k1, double k2, bool) {
        const double ksq = k1 * k1 + k2 * k2;
        if (ksq == 0.0) return;
        const auto kdotu = (k1 * su[idx] + k2 * sv[idx]) / ksq;
        su[idx] -= k1 * kdotu;
        sv[idx] -= k2 * kdotu;
    });
    return {spectral::inverse(g, su), spectral::inverse(g, sv)};
}

// u = (-psi_y, psi_x) with Delta psi = omega, plus the stored mean flow.
inline VelocityField2D velocity_of(const VorticityField& w) {
    const ParamGrid& g = w.omega.grid();
    auto sw = spectral::forward(w.omega);
    auto su = sw, sv = sw;
    euler_detail::for_each_k(g, [&](std::size_t idx, double k1, double k2, bool) {
        const double ksq = k1 * k1 + k2 * k2;
        if (ksq == 0.0) {
            su[idx] = 0.0;
            sv[idx] = 0.0;
            return;
        }
        const auto psi = -sw[idx] / ksq;
        su[idx] = std::complex<double>(0.0, -k2) * psi;  // -d(psi)/dy
        sv[idx] = std::complex<double>(0.0, k1) * psi;   //  d(psi)/dx
    });
    VelocityField2D out{spectral::inverse(g, su), spectral::inverse(g, sv)};
    for (double& t : out.u) t += w.mean_u;
    for (double& t : out.v) t += w.mean_v;
    return out;
}

inline ScalarField vorticity_of(const VelocityField2D& w) {
    ScalarField out = spectral::derivative(w.v, 0, 1);
    axpy(-1.0, spectral::derivative(w.u, 1, 1), out);
    return out;
}

inline double kinetic_energy(const VelocityField2D& w) {
    const double cell = w.grid().cell_measure();
    return 0.5 * (dot_plain(w.u, w.u) + dot_plain(w.v, w.v)) * cell;
}

inline double enstrophy(const VorticityField& w) {
    return 0.5 * dot_plain(w.omega, w.omega) * w.omega.grid().cell_measure();
}

namespace euler_detail {

// -(u . grad omega), dealiased by the 2/3 rule.
inline ScalarField advection_rhs(const VorticityField& w) {
    const ParamGrid& g = w.omega.grid();
    VelocityField2D vel = velocity_of(w);
    ScalarField wx = spectral::derivative(w.omega, 0, 1);
    ScalarField wy = spectral::derivative(w.omega, 1, 1);
    ScalarField rhs(g);
    for (std::size_t i = 0; i < rhs.size(); ++i)
        rhs[i] = -(vel.u[i] * wx[i] + vel.v[i] * wy[i]);
    auto spec = spectral::forward(rhs);
    spectral::dealias_two_thirds(g, spec);
    return spectral::inverse(g, spec);
}

} // namespace euler_detail

// One RK4 step of omega_t + u . grad omega = 0. The time step must satisfy
// dt <= 0.5 dx / |u|_inf; violations raise rather than silently substep.
inline VorticityField step_euler_vorticity(const VorticityField& w, double dt) {
    const ParamGrid& g = w.omega.grid();
    if (g.size(0) < 32 || g.size(1) < 32)
        throw RangeError("the vorticity solver expects a grid of at least 32x32");

    VelocityField2D vel = velocity_of(w);
    double umax = 0.0;
    for (std::size_t i = 0; i < vel.u.size(); ++i)
        umax = std::max(umax, std::max(std::abs(vel.u[i]), std::abs(vel.v[i])));
    const double dx = std::min(g.spacing(0), g.spacing(1));
    const double dt_max = 0.5 * dx / std::max(umax, 1e-300);
    if (dt > dt_max) throw CflError(dt, dt_max);

    auto stage = [&](const ScalarField& om) {
        VorticityField tmp(om, w.mean_u, w.mean_v);
        return euler_detail::advection_rhs(tmp);
    };
    ScalarField k1 = stage(w.omega);
    ScalarField k2 = stage(lin_comb(1.0, w.omega, dt / 2, k1));
    ScalarField k3 = stage(lin_comb(1.0, w.omega, dt / 2, k2));
    ScalarField k4 = stage(lin_comb(1.0, w.omega, dt, k3));

    VorticityField out = w;
    axpy(dt / 6, k1, out.omega);
    axpy(dt / 3, k2, out.omega);
    axpy(dt / 3, k3, out.omega);
    axpy(dt / 6, k4, out.omega);

    const double drift = VorticityField::mean_of(out.omega) - w.initial_mean;
    for (double& t : out.omega) t -= drift;
    out.initial_mean = w.initial_mean;
    return out;
}

// Band-limited point evaluation: zero-padded inverse transform onto a fine
// grid followed by 8-point tensor Lagrange interpolation.
class SpectralSampler2D {
public:
    explicit SpectralSampler2D(const ScalarField& f, int pad = 8)
        : fine_(f.grid().size(0) * pad, f.grid().size(1) * pad,
                f.grid().period(0), f.grid().period(1)) {
        auto spec = spectral::forward(f);
        values_ = spectral::inverse_padded(f.grid(), spec, pad, &fine_);
    }

    double operator()(double x, double y) const {
        const int n1 = fine_.size(0), n2 = fine_.size(1);
        const double t1 = x / fine_.spacing(0);
        const double t2 = y / fine_.spacing(1);
        const int i0 = static_cast<int>(std::floor(t1));
        const int j0 = static_cast<int>(std::floor(t2));
        double wx[8], wy[8];
        weights(t1 - i0, wx);
        weights(t2 - j0, wy);
        double acc = 0.0;
        for (int a = 0; a < 8; ++a) {
            const int i = wrap(i0 - 3 + a, n1);
            double row = 0.0;
            for (int b = 0; b < 8; ++b) {
                const int j = wrap(j0 - 3 + b, n2);
                row += wy[b] * values_[static_cast<std::size_t>(i) * n2 + j];
            }
            acc += wx[a] * row;
        }
        return acc;
    }

private:
    static int wrap(int i, int n) {
        i %= n;
        return i < 0 ? i + n : i;
    }
    // Lagrange weights on the stencil {-3,...,4} for offset s in [0,1).
    static void weights(double s, double* w) {
        static const double nodes[8] = {-3, -2, -1, 0, 1, 2, 3, 4};
        for (int a = 0; a < 8; ++a) {
            double num = 1.0, den = 1.0;
            for (int b = 0; b < 8; ++b) {
                if (a == b) continue;
                num *= s - nodes[b];
                den *= nodes[a] - nodes[b];
            }
            w[a] = num / den;
        }
    }

    ParamGrid fine_;
    std::vector<double> values_;
};

struct VelocitySampler {
    explicit VelocitySampler(const VelocityField2D& w) : su(w.u), sv(w.v) {}
    SpectralSampler2D su, sv;
};

// RK4 transport of a Lagrangian flow map along a time-dependent velocity;
// `vel_at` must provide the field at t, t+dt/2 and t+dt.
inline DiscreteImmersion advect_flowmap(const DiscreteImmersion& f,
                                        const std::function<const VelocitySampler&(double)>& vel_at,
                                        double t, double dt) {
    if (f.target_kind() != TargetKind::flat_torus || f.grid().dim() != 2)
        throw RangeError("flow maps live on the flat torus");
    const std::size_t nn = f.grid().nodes();
    const VelocitySampler& s0 = vel_at(t);
    const VelocitySampler& sh = vel_at(t + dt / 2);
    const VelocitySampler& s1 = vel_at(t + dt);

    VecField pts = f.points();
    auto eval = [&](const VelocitySampler& s, const VecField& q, VecField& k) {
        for (std::size_t i = 0; i < nn; ++i) {
            const double x = q.at(0, i), y = q.at(1, i);
            k.at(0, i) = s.su(x, y);
            k.at(1, i) = s.sv(x, y);
        }
    };
    VecField k1(f.grid(), 2), k2(f.grid(), 2), k3(f.grid(), 2), k4(f.grid(), 2);
    eval(s0, pts, k1);
    eval(sh, lin_comb(1.0, pts, dt / 2, k1), k2);
    eval(sh, lin_comb(1.0, pts, dt / 2, k2), k3);
    eval(s1, lin_comb(1.0, pts, dt, k3), k4);

    VecField delta = k1;
    axpy(2.0, k2, delta);
    axpy(2.0, k3, delta);
    axpy(1.0, k4, delta);
    return f.displaced(delta, dt / 6.0);
}

// Agreement of the general decomposition at the identity with the classical
// Leray projection (the TrS == 0 branch is the Helmholtz-Hodge split).
struct LerayCrosscheck {
    double sup_hmu_diff;
    double sup_p_diff;
};

inline LerayCrosscheck crosscheck_general_projection(const TangentField& h) {
    const ParamGrid& g = h.grid();
    DiscreteImmersion id = make_torus_identity(g.size(0), g.size(1), g.period(0), g.period(1));
    BackgroundDensity mu = BackgroundDensity::uniform(g);
    GeometryCache c = build_geometry(id, mu);
    ProjectionResult dec = decompose(c, h);

    ScalarField hu(g), hv(g);
    std::copy(h.comp(0).begin(), h.comp(0).end(), hu.begin());
    std::copy(h.comp(1).begin(), h.comp(1).end(), hv.begin());
    VelocityField2D w{std::move(hu), std::move(hv)};
    VelocityField2D df = leray_project(w);

    double sup_h = 0.0;
    for (std::size_t i = 0; i < g.nodes(); ++i) {
        sup_h = std::max(sup_h, std::abs(dec.h_mu.at(0, i) - df.u[i]));
        sup_h = std::max(sup_h, std::abs(dec.h_mu.at(1, i) - df.v[i]));
    }

    // scalar potential of the gradient part, zero-mean gauge
    auto su = spectral::forward(w.u);
    auto sv = spectral::forward(w.v);
    auto phi = su;
    euler_detail::for_each_k(g, [&](std::size_t idx, double k1, double k2, bool) {
        const double ksq = k1 * k1 + k2 * k2;
        phi[idx] = ksq == 0.0 ? 0.0
                              : (k1 * su[idx] + k2 * sv[idx]) / std::complex<double>(0.0, ksq);
    });
    ScalarField pot = spectral::inverse(g, phi);
    double sup_p = 0.0;
    for (std::size_t i = 0; i < g.nodes(); ++i)
        sup_p = std::max(sup_p, std::abs(dec.p[i] - pot[i]));
    return {sup_h, sup_p};
}

} // namespace volimm
