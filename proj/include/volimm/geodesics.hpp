#pragma once

#include <string>

#include "volimm/projection.hpp"

namespace volimm {

struct GeodesicState {
    DiscreteImmersion f;
    TangentField velocity;
    double t = 0.0;
};

struct InvariantSample {
    double t;
    double energy;           // G^l(f_t, f_t) for the run's metric order
    double max_rho_dev;      // sup |rho(f) - 1|
    double max_constraint;   // sup |A_f(f_t)|
    double p_min, p_max;     // multiplier field extremes of the last step
};

enum class Scheme { rk4_explicit_p, rattle, discrete_lagrangian };

struct IntegratorConfig {
    Scheme scheme = Scheme::rattle;
    double dt = 1e-3;
    double t_end = 1.0;
    int output_stride = 100;
    int sobolev_order = 0;      // l: metric for discrete_lagrangian and the energy log
    double solver_tol = 1e-10;
    double newton_tol = 1e-10;
    int newton_cap = 50;
    bool renormalize = false;   // re-project the velocity after every step
    double drift_tol = 1e-6;    // admissibility bound on the initial state

    void validate() const {
        if (!(dt > 0.0)) throw RangeError("integrator dt must be positive");
        if (!(t_end > 0.0)) throw RangeError("integrator t_end must be positive");
        if (output_stride < 1) throw RangeError("output stride must be >= 1");
        validate_order(sobolev_order);
        if (scheme == Scheme::discrete_lagrangian && sobolev_order < 1)
            throw RangeError("the discrete-Lagrangian scheme needs sobolev_order >= 1");
    }
};

struct StepDiagnostics {
    double p_min = 0.0, p_max = 0.0;
    int newton_iters = 0;
};

struct Trajectory {
    std::vector<GeodesicState> snapshots;
    std::vector<InvariantSample> log;
    long renormalizations = 0;  // velocity re-projections applied by policy
    bool failed = false;
    std::string failure;
};

// ---- L^2 geodesic right-hand side on curves -------------------------------
//
// f_tt = Tf.grad^g(p) + p.Tr^g(S) with (Delta - |TrS|^2) p = -g^{11} |c_t'|^2,
// the constant-speed-curve reduction of the general multiplier equation
// (for |c'| = 1 this is p'' - |c''|^2 p = -|c_t'|^2 and f_tt = (p c')').
struct CurveRhs {
    TangentField acceleration;
    ScalarField p;
    OperatorStats stats;
};

inline CurveRhs rhs_l2_curve(const GeometryCache& c, const TangentField& v,
                             double tol = 1e-10) {
    if (c.d != 1 || c.n != 2)
        throw RangeError("rhs_l2_curve is defined for plane curves (d=1, n=2)");
    VecField dv = spectral::derivative(v, 0, 1);
    ScalarField rhs(c.grid);
    for (std::size_t node = 0; node < c.grid.nodes(); ++node)
        rhs[node] = -c.metric.ginv(node, 0, 0) * c.dot_target(dv, dv, node);
    auto [p, stats] = solve_constraint_elliptic(c, rhs, tol);
    return {span_field(c, p), std::move(p), stats};
}

// ---- explicit RK4 on the curve equation -----------------------------------

inline GeodesicState step_rk4_explicit(const GeodesicState& s, const BackgroundDensity& mu,
                                       double dt, double tol = 1e-10,
                                       StepDiagnostics* diag = nullptr) {
    auto accel = [&](const DiscreteImmersion& f, const TangentField& v, bool record) {
        GeometryCache c = build_geometry(f, mu);
        CurveRhs r = rhs_l2_curve(c, v, tol);
        if (record && diag) {
            diag->p_min = *std::min_element(r.p.begin(), r.p.end());
            diag->p_max = *std::max_element(r.p.begin(), r.p.end());
        }
        return r.acceleration;
    };

    const DiscreteImmersion& f0 = s.f;
    const TangentField& v0 = s.velocity;

    TangentField a1 = accel(f0, v0, true);
    DiscreteImmersion f2 = f0.displaced(v0, dt / 2);
    TangentField v2 = lin_comb(1.0, v0, dt / 2, a1);
    TangentField a2 = accel(f2, v2, false);

    DiscreteImmersion f3 = f0.displaced(v2, dt / 2);
    TangentField v3 = lin_comb(1.0, v0, dt / 2, a2);
    TangentField a3 = accel(f3, v3, false);

    DiscreteImmersion f4 = f0.displaced(v3, dt);
    TangentField v4 = lin_comb(1.0, v0, dt, a3);
    TangentField a4 = accel(f4, v4, false);

    DiscreteImmersion f_new = f0;
    {
        VecField dq = v0;
        axpy(2.0, v2, dq);
        axpy(2.0, v3, dq);
        axpy(1.0, v4, dq);
        f_new = f0.displaced(dq, dt / 6.0);
    }
    TangentField v_new = v0;
    axpy(dt / 6.0, a1, v_new);
    axpy(dt / 3.0, a2, v_new);
    axpy(dt / 3.0, a3, v_new);
    axpy(dt / 6.0, a4, v_new);
    return {std::move(f_new), std::move(v_new), s.t + dt};
}

// ---- RATTLE for the L^2 metric ---------------------------------------------
//
// Constrained Stoermer-Verlet with the node-wise constraint rho(f) = 1 and a
// multiplier field lambda: the constraint force direction is exactly
// span{Tf.grad lambda + lambda TrS}, and the velocity stage is the L^2
// projection of the provisional velocity.
inline GeodesicState step_rattle(const GeodesicState& s, const BackgroundDensity& mu,
                                 double dt, double tol = 1e-10,
                                 double newton_tol = 1e-10, int newton_cap = 50,
                                 StepDiagnostics* diag = nullptr) {
    GeometryCache c0 = build_geometry(s.f, mu);

    // acceleration induced by a multiplier field at the step's base point
    auto accel_of = [&](const ScalarField& lam) {
        TangentField a = span_field(c0, lam);
        for (int comp = 0; comp < a.comps(); ++comp) {
            auto plane = a.comp(comp);
            for (std::size_t i = 0; i < a.nodes(); ++i)
                plane[i] *= c0.metric.sqrt_det(i) / c0.mu_weight[i];
        }
        return a;
    };

    // Newton on the multiplier with the exact discrete Jacobian. The frozen
    // operator (Delta - |TrS|^2) misestimates the density response near the
    // band edge (derivative-of-product aliasing), so it serves only as the
    // preconditioner; the true derivative of rho is the first-variation
    // formula evaluated at the current iterate.
    const detail::MeanSymbol sym(c0);
    double b_mean = 0.0;
    for (double t : c0.tr_s_norm_sq) b_mean += t;
    b_mean /= c0.tr_s_norm_sq.size();
    const double floor_ksq = sym.ksq(2.0 * std::numbers::pi / s.f.grid().period(0), 0.0);
    auto precond_mult = detail::nyquist_zeroed(s.f.grid(), [&](double k1, double k2) {
        return -(2.0 / (dt * dt)) / std::max(sym.ksq(k1, k2) + b_mean, 1e-3 * floor_ksq);
    });
    std::function<ScalarField(const ScalarField&)> precond = [&](const ScalarField& r) {
        return spectral::apply_multiplier(r, precond_mult);
    };

    ScalarField lambda(s.f.grid());
    DiscreteImmersion f_new = s.f;
    int it = 0;
    for (;; ++it) {
        TangentField shift = lin_comb(1.0, s.velocity, dt / 2.0, accel_of(lambda));
        f_new = s.f.displaced(shift, dt);
        ScalarField r = rho_of(f_new, mu);
        for (double& t : r) t -= 1.0;
        const double res = linf_norm(r);
        if (res <= newton_tol) break;
        if (it >= newton_cap)
            throw NewtonError("rattle position stage", it, res);

        GeometryCache cc = build_geometry(f_new, mu);
        std::function<ScalarField(const ScalarField&)> jac = [&](const ScalarField& dl) {
            ScalarField dr = dvol_variation(cc, accel_of(dl));
            for (std::size_t i = 0; i < dr.size(); ++i)
                dr[i] *= 0.5 * dt * dt / cc.mu_weight[i];
            return dr;
        };
        ScalarField neg_r = r;
        scale(neg_r, -1.0);
        auto [dlam, st] = bicgstab<ScalarField>(neg_r, jac, precond, 1e-3, 400);
        if (!st.converged)
            throw NewtonError("rattle position stage (Jacobian solve)", it, res);
        axpy(1.0, dlam, lambda);
    }

    TangentField v_half = lin_comb(1.0, s.velocity, dt / 2.0, accel_of(lambda));
    GeometryCache c1 = build_geometry(f_new, mu);
    ProjectionResult proj = l2_project(c1, v_half, tol);

    if (diag) {
        diag->p_min = *std::min_element(lambda.begin(), lambda.end());
        diag->p_max = *std::max_element(lambda.begin(), lambda.end());
        diag->newton_iters = it;
    }
    return {std::move(f_new), std::move(proj.h_mu), s.t + dt};
}

// ---- variational midpoint scheme for G^l, curves ---------------------------

namespace detail {

// Gradient in q of E(q, v) = int <(1+Delta_B)^l v, v> sqrt(g) dtheta for a
// plane curve, with v held fixed: collecting the first variation of the
// volume density and of the Laplacian coefficients gives
//   grad_q E = -(a . T)'   with T = q' / |q'| and
//   a = <Lv,v> - sum_i [ <Delta_B u_i, w_i> + <u_i', w_i'> / g ],
// where u_i = (1+Delta_B)^{l-1-i} v and w_i = (1+Delta_B)^i v.
inline VecField grad_q_energy_curve(const GeometryCache& c, const TangentField& v, int l) {
    std::vector<TangentField> pows{v};
    for (int j = 1; j <= l; ++j)
        pows.push_back(apply_one_plus_laplacian(c, pows.back()));

    ScalarField a(c.grid);
    std::vector<VecField> dpows;
    for (int j = 0; j < l; ++j) dpows.push_back(spectral::derivative(pows[j], 0, 1));
    for (std::size_t node = 0; node < c.grid.nodes(); ++node) {
        double acc = c.dot_target(pows[l], v, node);
        const double ginv = c.metric.ginv(node, 0, 0);
        for (int i = 0; i < l; ++i) {
            const int ju = l - 1 - i;
            double lap_term = 0.0, grad_term = 0.0;
            for (int comp = 0; comp < c.n; ++comp) {
                lap_term += (pows[ju + 1].at(comp, node) - pows[ju].at(comp, node)) *
                            pows[i].at(comp, node);
                grad_term += dpows[ju].at(comp, node) * dpows[i].at(comp, node);
            }
            acc -= lap_term + ginv * grad_term;
        }
        a[node] = acc;
    }

    VecField at(c.grid, c.n);
    for (std::size_t node = 0; node < c.grid.nodes(); ++node) {
        const double coeff = a[node] / c.metric.sqrt_det(node);
        for (int comp = 0; comp < c.n; ++comp)
            at.at(comp, node) = coeff * c.df[0].at(comp, node);
    }
    VecField grad = spectral::derivative(at, 0, 1);
    scale(grad, -1.0);
    return grad;
}

} // namespace detail

// One step of the constrained variational midpoint discretization of the
// action  int G^l(f_t, f_t) dt  subject to rho(f) = 1. Position stage:
//   sqrt(g)|_mid L_mid v - (dt/4) grad_q E(mid, v) =
//       p_n + (dt/2) sqrt(g)|_n (Tf.grad lambda + lambda TrS),  rho(q+) = 1,
// with p_n = sqrt(g)|_n L_n(v_n); velocity stage: discrete Legendre transform
// followed by the G^l projection at the new base point.
inline GeodesicState step_discrete_lagrangian(const GeodesicState& s,
                                              const BackgroundDensity& mu,
                                              double dt, int l, double tol = 1e-10,
                                              double newton_tol = 1e-10, int newton_cap = 50,
                                              StepDiagnostics* diag = nullptr) {
    validate_order(l);
    if (l < 1) throw RangeError("step_discrete_lagrangian needs l >= 1");
    if (s.f.grid().dim() != 1)
        throw RangeError("the discrete-Lagrangian scheme is implemented for curves");

    GeometryCache c0 = build_geometry(s.f, mu);
    if (c0.is_minimal()) throw MinimalImmersionError();

    // p_n = sqrt(g) L v_n
    TangentField mom = apply_L(c0, s.velocity, l);
    for (int comp = 0; comp < mom.comps(); ++comp) {
        auto plane = mom.comp(comp);
        for (std::size_t i = 0; i < mom.nodes(); ++i) plane[i] *= c0.metric.sqrt_det(i);
    }

    // preconditioner for the multiplier solves: the Psi symbol scaled by the
    // step factor, negated (Psi is negative definite)
    const detail::MeanSymbol sym(c0);
    double b_mean = 0.0;
    for (double t : c0.tr_s_norm_sq) b_mean += t;
    b_mean /= c0.tr_s_norm_sq.size();
    auto precond_mult = detail::nyquist_zeroed(s.f.grid(), [&, l](double k1, double k2) {
        const double q = sym.ksq(k1, k2);
        return -(2.0 / (dt * dt)) / (q / std::pow(1.0 + q, l) + b_mean);
    });
    std::function<ScalarField(const ScalarField&)> lam_precond = [&](const ScalarField& r) {
        return spectral::apply_multiplier(r, precond_mult);
    };

    ScalarField lambda(s.f.grid());
    DiscreteImmersion f_new = s.f.displaced(s.velocity, dt);
    const double mom_scale = std::max(linf_norm(mom), 1e-300);

    int it = 0;
    double best = std::numeric_limits<double>::max();
    TangentField d2l(s.f.grid(), c0.n);  // D2 L_d of the accepted step
    for (;; ++it) {
        DiscreteImmersion f_mid = s.f;
        {
            VecField half = lin_comb(0.5, f_new.displacement(), -0.5, s.f.displacement());
            f_mid = s.f.displaced(half);
        }
        GeometryCache cm = build_geometry(f_mid, mu);
        TangentField v = lin_comb(1.0 / dt, f_new.displacement(), -1.0 / dt, s.f.displacement());

        TangentField lv = apply_L(cm, v, l);
        VecField gradE = detail::grad_q_energy_curve(cm, v, l);
        TangentField constraint_force = span_field(c0, lambda);

        TangentField residual(s.f.grid(), c0.n);
        for (int comp = 0; comp < c0.n; ++comp)
            for (std::size_t i = 0; i < residual.nodes(); ++i)
                residual.at(comp, i) = cm.metric.sqrt_det(i) * lv.at(comp, i)
                                       - 0.25 * dt * gradE.at(comp, i)
                                       - mom.at(comp, i)
                                       - 0.5 * dt * c0.metric.sqrt_det(i) *
                                             constraint_force.at(comp, i);

        ScalarField rho = rho_of(f_new, mu);
        for (double& t : rho) t -= 1.0;
        const double res_el = linf_norm(residual) / mom_scale;
        const double res_c = linf_norm(rho);
        const double res = std::max(res_el, res_c);
        if (res <= newton_tol) {
            for (int comp = 0; comp < c0.n; ++comp)
                for (std::size_t i = 0; i < d2l.nodes(); ++i)
                    d2l.at(comp, i) = cm.metric.sqrt_det(i) * lv.at(comp, i)
                                      + 0.25 * dt * gradE.at(comp, i);
            break;
        }
        if (it >= newton_cap)
            throw NewtonError("discrete-Lagrangian position stage", it, std::min(res, best));
        best = std::min(best, res);

        // quasi-Newton on the EL block: dominant Jacobian is sqrt(g) L / dt
        TangentField rs = residual;
        for (int comp = 0; comp < rs.comps(); ++comp) {
            auto plane = rs.comp(comp);
            for (std::size_t i = 0; i < rs.nodes(); ++i) plane[i] /= cm.metric.sqrt_det(i);
        }
        auto [dq, li_stats] = invert_L(cm, rs, l, std::max(1e-14, 1e-3 * tol));
        f_new = f_new.displaced(dq, -dt);

        // multiplier correction from the density at the updated position,
        // with the exact first-variation Jacobian through L^{-1}
        ScalarField rho_new = rho_of(f_new, mu);
        for (double& t : rho_new) t -= 1.0;
        if (linf_norm(rho_new) > newton_tol) {
            GeometryCache cc = build_geometry(f_new, mu);
            std::function<ScalarField(const ScalarField&)> jac = [&](const ScalarField& dl) {
                TangentField w = span_field(c0, dl);
                for (int comp = 0; comp < w.comps(); ++comp) {
                    auto plane = w.comp(comp);
                    for (std::size_t i = 0; i < w.nodes(); ++i)
                        plane[i] *= c0.metric.sqrt_det(i) / cm.metric.sqrt_det(i);
                }
                auto [linv, lst] = invert_L(cm, w, l, 1e-12);
                ScalarField dr = dvol_variation(cc, linv);
                for (std::size_t i = 0; i < dr.size(); ++i)
                    dr[i] *= 0.5 * dt * dt / cc.mu_weight[i];
                return dr;
            };
            ScalarField neg_r = rho_new;
            scale(neg_r, -1.0);
            auto [dlam, st] = bicgstab<ScalarField>(neg_r, jac, lam_precond, 1e-3, 400);
            if (!st.converged)
                throw NewtonError("discrete-Lagrangian multiplier solve", it, res);
            axpy(1.0, dlam, lambda);
        }
    }

    // discrete Legendre transform and constraint-consistent velocity
    GeometryCache c1 = build_geometry(f_new, mu);
    TangentField w = d2l;
    for (int comp = 0; comp < w.comps(); ++comp) {
        auto plane = w.comp(comp);
        for (std::size_t i = 0; i < w.nodes(); ++i) plane[i] /= c1.metric.sqrt_det(i);
    }
    auto [v_prov, li_stats] = invert_L(c1, w, l, std::max(1e-14, 1e-3 * tol));
    ProjectionResult proj = hk_project(c1, v_prov, l, tol);

    if (diag) {
        diag->p_min = *std::min_element(lambda.begin(), lambda.end());
        diag->p_max = *std::max_element(lambda.begin(), lambda.end());
        diag->newton_iters = it;
    }
    return {std::move(f_new), std::move(proj.h_mu), s.t + dt};
}

// ---- driver -----------------------------------------------------------------

inline Trajectory integrate(const GeodesicState& initial, const BackgroundDensity& mu,
                            const IntegratorConfig& cfg) {
    cfg.validate();

    Trajectory traj;
    GeometryCache c0 = build_geometry(initial.f, mu);
    double rho_dev = 0.0;
    for (std::size_t i = 0; i < c0.rho.size(); ++i)
        rho_dev = std::max(rho_dev, std::abs(c0.rho[i] - 1.0));
    const double cres = linf_norm(constraint_residual(c0, initial.velocity));
    const double vscale = std::max(linf_norm(initial.velocity), 1.0);
    if (rho_dev > cfg.drift_tol || cres > cfg.drift_tol * vscale)
        throw InvalidInitialDataError(rho_dev, cres);

    const long n_steps = std::lround(cfg.t_end / cfg.dt);
    GeodesicState state = initial;

    auto sample = [&](const GeodesicState& st, const StepDiagnostics& d) {
        GeometryCache c = build_geometry(st.f, mu);
        double dev = 0.0;
        for (std::size_t i = 0; i < c.rho.size(); ++i)
            dev = std::max(dev, std::abs(c.rho[i] - 1.0));
        traj.log.push_back({st.t,
                            inner_product_Gl(c, st.velocity, st.velocity, cfg.sobolev_order),
                            dev,
                            linf_norm(constraint_residual(c, st.velocity)),
                            d.p_min, d.p_max});
    };

    sample(state, StepDiagnostics{});
    traj.snapshots.push_back(state);
    try {
        for (long step = 0; step < n_steps; ++step) {
            StepDiagnostics diag;
            switch (cfg.scheme) {
                case Scheme::rk4_explicit_p:
                    state = step_rk4_explicit(state, mu, cfg.dt, cfg.solver_tol, &diag);
                    break;
                case Scheme::rattle:
                    state = step_rattle(state, mu, cfg.dt, cfg.solver_tol, cfg.newton_tol,
                                        cfg.newton_cap, &diag);
                    break;
                case Scheme::discrete_lagrangian:
                    state = step_discrete_lagrangian(state, mu, cfg.dt, cfg.sobolev_order,
                                                     cfg.solver_tol, cfg.newton_tol,
                                                     cfg.newton_cap, &diag);
                    break;
            }
            if (cfg.renormalize) {
                GeometryCache c = build_geometry(state.f, mu);
                state.velocity = l2_project(c, state.velocity, cfg.solver_tol).h_mu;
                ++traj.renormalizations;
            }
            sample(state, diag);
            if ((step + 1) % cfg.output_stride == 0 || step + 1 == n_steps)
                traj.snapshots.push_back(state);
        }
    } catch (const Error& e) {
        traj.failed = true;
        traj.failure = e.what();
    }
    return traj;
}

} // namespace volimm
