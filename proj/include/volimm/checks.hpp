#pragma once

#include <chrono>
#include <functional>
#include <iostream>

#include "volimm/dense_oracle.hpp"
#include "volimm/euler.hpp"
#include "volimm/initial_conditions.hpp"

namespace volimm {

struct CheckResult {
    int id;
    std::string name;
    bool pass;
    std::string detail;
};

namespace checks_detail {

inline std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3g", v);
    return buf;
}

inline double slope(const std::vector<double>& xs, const std::vector<double>& ys) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const int n = static_cast<int>(xs.size());
    for (int i = 0; i < n; ++i) {
        const double x = std::log(xs[i]), y = std::log(ys[i]);
        sx += x; sy += y; sxx += x * x; sxy += x * y;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

inline double rotation_error(const GeodesicState& s, double omega) {
    DiscreteImmersion exact = exact_rotation_curve(s.f.grid().size(0), omega, s.t);
    return linf_norm(lin_comb(1.0, s.f.displacement(), -1.0, exact.displacement()));
}

struct WhipRun {
    Trajectory traj;
    double max_rho = 0.0, energy_drift_rel = 0.0, max_constraint = 0.0;
};

inline WhipRun run_whip(Scheme scheme, int n, double dt, double t_end, int l = 0) {
    GeodesicState s = make_whip(n);
    BackgroundDensity mu = BackgroundDensity::from_immersion(s.f);
    IntegratorConfig cfg;
    cfg.scheme = scheme;
    cfg.dt = dt;
    cfg.t_end = t_end;
    cfg.output_stride = std::max<long>(1, std::lround(t_end / dt) / 8);
    cfg.sobolev_order = l;
    Trajectory traj = integrate(s, mu, cfg);
    if (traj.failed) throw NumericalError("whip run failed: " + traj.failure);
    WhipRun out;
    const double e0 = traj.log.front().energy;
    for (const auto& row : traj.log) {
        out.max_rho = std::max(out.max_rho, row.max_rho_dev);
        out.energy_drift_rel = std::max(out.energy_drift_rel, std::abs(row.energy - e0) / e0);
        out.max_constraint = std::max(out.max_constraint, row.max_constraint);
    }
    out.traj = std::move(traj);
    return out;
}

// 1. round-circle projection closed forms
inline CheckResult criterion_1() {
    const auto t0 = std::chrono::steady_clock::now();
    DiscreteImmersion f = make_circle(64);
    GeometryCache c = build_geometry(f, BackgroundDensity::from_immersion(f));
    TangentField radial(c.grid, 2), rot(c.grid, 2);
    for (std::size_t i = 0; i < c.grid.nodes(); ++i) {
        const double th = c.grid.coord(0, i);
        radial.at(0, i) = std::cos(th);
        radial.at(1, i) = std::sin(th);
        rot.at(0, i) = -std::sin(th);
        rot.at(1, i) = std::cos(th);
    }
    ProjectionResult a = l2_project(c, radial);
    ProjectionResult b = l2_project(c, rot);
    double err = linf_norm(a.h_mu);
    for (double t : a.p) err = std::max(err, std::abs(t + 1.0));
    err = std::max(err, linf_norm(b.p));
    err = std::max(err, linf_norm(lin_comb(1.0, b.h_mu, -1.0, rot)));
    const double secs = std::chrono::duration<double>(
        std::chrono::steady_clock::now() - t0).count();
    return {1, "round-circle projection closed forms",
            err <= 1e-8 && secs < 1.0,
            "sup err " + num(err) + ", " + num(secs) + " s"};
}

// 2. rigid-rotation geodesic oracle and convergence orders
inline CheckResult criterion_2() {
    BackgroundDensity mu128 = BackgroundDensity::from_immersion(make_circle(128));
    GeodesicState rk = make_circle_rotation(128, 1.0);
    GeodesicState ra = rk;
    const long steps = 1000;
    for (long i = 0; i < steps; ++i) rk = step_rk4_explicit(rk, mu128, 1e-3);
    for (long i = 0; i < steps; ++i) ra = step_rattle(ra, mu128, 1e-3);
    const double err_rk = rotation_error(rk, 1.0);
    const double err_ra = rotation_error(ra, 1.0);

    BackgroundDensity mu64 = BackgroundDensity::from_immersion(make_circle(64));
    std::vector<double> dts{0.04, 0.02, 0.01};
    std::vector<double> e_rk, e_ra;
    for (double dt : dts) {
        GeodesicState s = make_circle_rotation(64, 2.0);
        GeodesicState s2 = s;
        const long m = std::lround(0.8 / dt);
        for (long i = 0; i < m; ++i) s = step_rk4_explicit(s, mu64, dt);
        for (long i = 0; i < m; ++i) s2 = step_rattle(s2, mu64, dt);
        e_rk.push_back(rotation_error(s, 2.0));
        e_ra.push_back(rotation_error(s2, 2.0));
    }
    const double slope_rk = slope(dts, e_rk);
    const double slope_ra = slope(dts, e_ra);
    const bool pass = err_rk <= 1e-6 && err_ra <= 1e-5 &&
                      std::abs(slope_rk - 4.0) <= 0.3 && std::abs(slope_ra - 2.0) <= 0.2;
    return {2, "rigid-rotation geodesic oracle",
            pass,
            "rk4 " + num(err_rk) + ", rattle " + num(err_ra) + ", slopes " +
                num(slope_rk) + "/" + num(slope_ra)};
}

// 3 and 4 share the whip runs; computed once by the driver below.
struct WhipBundle {
    WhipRun rattle, rk4, dl;
};

inline WhipBundle whip_bundle() {
    WhipBundle b;
    b.rattle = run_whip(Scheme::rattle, 128, 1e-3, 1.0, 0);
    b.rk4 = run_whip(Scheme::rk4_explicit_p, 128, 1e-3, 1.0, 0);
    b.dl = run_whip(Scheme::discrete_lagrangian, 64, 1e-3, 1.0, 1);
    return b;
}

inline CheckResult criterion_3(const WhipBundle& b) {
    const bool pass = b.rattle.max_rho <= 1e-8 && b.rk4.max_rho < 1e-6;
    return {3, "constraint preservation on the whip",
            pass,
            "rattle |rho-1| " + num(b.rattle.max_rho) + ", rk4 drift " + num(b.rk4.max_rho)};
}

inline CheckResult criterion_4(const WhipBundle& b) {
    const bool pass = b.rattle.energy_drift_rel <= 1e-6 && b.dl.energy_drift_rel <= 1e-6;
    return {4, "energy conservation (l = 0 rattle, l = 1 variational)",
            pass,
            "drift l0 " + num(b.rattle.energy_drift_rel) + ", l1 " +
                num(b.dl.energy_drift_rel)};
}

// 5. the Psi operator
inline CheckResult criterion_5() {
    DiscreteImmersion f = make_perturbed_circle(64);
    GeometryCache c = build_geometry(f, BackgroundDensity::from_immersion(f));
    double adj = 0.0;
    bool negative = true;
    for (int l : {0, 1, 2}) {
        ScalarField p = random_smooth_scalar(c.grid, 100 + l);
        ScalarField q = random_smooth_scalar(c.grid, 200 + l);
        auto [pp, s1] = apply_Psi(c, p, l, 1e-13);
        auto [qq, s2] = apply_Psi(c, q, l, 1e-13);
        const double a = inner_l2_vol(c, pp, q);
        const double bb = inner_l2_vol(c, p, qq);
        adj = std::max(adj, std::abs(a - bb) / std::max(std::abs(a), std::abs(bb)));
        negative = negative && inner_l2_vol(c, pp, p) < 0.0;
    }

    DiscreteImmersion circ = make_circle(64);
    GeometryCache cc = build_geometry(circ, BackgroundDensity::from_immersion(circ));
    double sym_dev = 0.0;
    for (int l : {0, 1, 2}) {
        const double m = std::abs(psi_symbol_probe(cc, l, 16));
        const double want = std::pow(16.0, 2 - 2 * l);
        sym_dev = std::max(sym_dev, std::abs(m / want - 1.0));
    }
    ScalarField p = random_smooth_scalar(cc.grid, 300);
    auto [psi, st] = apply_Psi(cc, p, 0);
    ScalarField reduction = spectral::derivative(p, 0, 2);
    axpy(-1.0, p, reduction);
    const double red_err = linf_norm(lin_comb(1.0, psi, -1.0, reduction));

    const bool pass = adj <= 1e-9 && negative && sym_dev <= 0.05 && red_err <= 1e-10;
    return {5, "Psi operator (self-adjoint, negative, symbol, circle reduction)",
            pass,
            "adj " + num(adj) + ", symbol dev " + num(sym_dev) + ", reduction " +
                num(red_err)};
}

// 6. projection properties and the dense oracle
inline CheckResult criterion_6() {
    DiscreteImmersion f = make_perturbed_circle(64);
    GeometryCache c = build_geometry(f, BackgroundDensity::from_immersion(f));
    double idem = 0.0, orth = 0.0;
    {
        TangentField x = random_smooth_vec(c.grid, 2, 41);
        ProjectionResult pr = l2_project(c, x, 1e-10);
        ProjectionResult twice = l2_project(c, pr.h_mu, 1e-10);
        idem = std::max(idem, linf_norm(lin_comb(1.0, twice.h_mu, -1.0, pr.h_mu)));
        orth = std::max(orth, pr.orthogonality_defect);
    }
    for (int l : {1, 2}) {
        TangentField x = random_smooth_vec(c.grid, 2, 50 + l);
        ProjectionResult pr = hk_project(c, x, l, 1e-10);
        ProjectionResult twice = hk_project(c, pr.h_mu, l, 1e-10);
        idem = std::max(idem, linf_norm(lin_comb(1.0, twice.h_mu, -1.0, pr.h_mu)));
        orth = std::max(orth, pr.orthogonality_defect);
    }

    DiscreteImmersion f32 = make_circle(32);
    GeometryCache c32 = build_geometry(f32, BackgroundDensity::from_immersion(f32));
    TangentField x = random_smooth_vec(c32.grid, 2, 60);
    double dense_err = linf_norm(lin_comb(1.0, l2_project(c32, x, 1e-12).h_mu, -1.0,
                                           dense::l2_project_dense(c32, x)));
    for (int l : {1, 2})
        dense_err = std::max(dense_err,
                             linf_norm(lin_comb(1.0, hk_project(c32, x, l, 1e-12).h_mu, -1.0,
                                                dense::hk_project_dense(c32, x, l))));
    const bool pass = idem <= 1e-7 && orth <= 1e-7 && dense_err <= 1e-8;
    return {6, "projection idempotency/orthogonality and dense oracle",
            pass,
            "idem " + num(idem) + ", orth " + num(orth) + ", dense " + num(dense_err)};
}

// 7. first-variation finite-difference slopes
inline CheckResult criterion_7() {
    DiscreteImmersion f = make_perturbed_circle(32, 0.1, 3);
    BackgroundDensity unit = BackgroundDensity::uniform(f.grid());
    GeometryCache c = build_geometry(f, unit);
    TangentField h = random_smooth_vec(c.grid, 2, 71);
    const std::vector<double> eps{1e-3, 1e-4, 1e-5, 1e-6};
    std::vector<double> ev, em;
    ScalarField dv = dvol_variation(c, h);
    std::vector<ScalarField> dm = dmetric_variation(c, h);
    for (double e : eps) {
        DiscreteImmersion fe = f.displaced(h, e);
        ScalarField vol_e = rho_of(fe, unit);
        double err = 0.0;
        for (std::size_t i = 0; i < vol_e.size(); ++i)
            err = std::max(err, std::abs((vol_e[i] - c.metric.sqrt_det(i)) / e - dv[i]));
        ev.push_back(err);
        GeometryCache ce = build_geometry(fe, unit);
        double err_m = 0.0;
        for (int k = 0; k < c.metric.packed_count(); ++k)
            for (std::size_t i = 0; i < vol_e.size(); ++i)
                err_m = std::max(err_m, std::abs(
                    (ce.metric.g_packed(k)[i] - c.metric.g_packed(k)[i]) / e - dm[k][i]));
        em.push_back(err_m);
    }
    const double s_vol = slope(eps, ev);
    const double s_met = slope(eps, em);
    const bool pass = std::abs(s_vol - 1.0) <= 0.1 && std::abs(s_met - 1.0) <= 0.1;
    return {7, "first-variation finite-difference slopes",
            pass, "dvol slope " + num(s_vol) + ", dmetric slope " + num(s_met)};
}

// 8. the Euler special case
inline CheckResult criterion_8() {
    ParamGrid g(64, 64);
    VorticityField shear(make_shear_vorticity(g));
    VorticityField w = shear;
    for (int i = 0; i < 1000; ++i) w = step_euler_vorticity(w, 1e-3);
    const double shear_dev = linf_norm(lin_comb(1.0, w.omega, -1.0, shear.omega));

    VorticityField rnd(make_random_vorticity(g, 8));
    const double e0 = kinetic_energy(velocity_of(rnd));
    const double z0 = enstrophy(rnd);
    VorticityField wr = rnd;
    for (int i = 0; i < 1000; ++i) wr = step_euler_vorticity(wr, 1e-3);
    const double e_drift = std::abs(kinetic_energy(velocity_of(wr)) - e0) / e0;
    const double z_drift = std::abs(enstrophy(wr) - z0) / z0;

    TangentField h = random_smooth_vec(g, 2, 81, 3.0);
    LerayCrosscheck lc = crosscheck_general_projection(h);

    DiscreteImmersion flow = make_torus_identity(64, 64);
    BackgroundDensity mu = BackgroundDensity::uniform(g);
    VelocitySampler sampler(velocity_of(shear));
    auto at = [&](double) -> const VelocitySampler& { return sampler; };
    for (int i = 0; i < 500; ++i) flow = advect_flowmap(flow, at, i * 1e-3, 1e-3);
    ScalarField rho = rho_of(flow, mu);
    double vol_dev = 0.0;
    for (double t : rho) vol_dev = std::max(vol_dev, std::abs(t - 1.0));

    const bool pass = shear_dev <= 1e-8 && e_drift <= 1e-6 && z_drift <= 1e-6 &&
                      lc.sup_hmu_diff <= 1e-9 && vol_dev <= 1e-6;
    return {8, "incompressible Euler case",
            pass,
            "shear " + num(shear_dev) + ", energy " + num(e_drift) + ", enstrophy " +
                num(z_drift) + ", leray " + num(lc.sup_hmu_diff) + ", vol " + num(vol_dev)};
}

// 9. cross-integrator agreement
inline CheckResult criterion_9() {
    GeodesicState s = make_whip(128);
    BackgroundDensity mu = BackgroundDensity::from_immersion(s.f);
    GeodesicState a = s, b = s;
    for (int i = 0; i < 250; ++i) {
        a = step_rk4_explicit(a, mu, 1e-3);
        b = step_rattle(b, mu, 1e-3);
    }
    const double gap = linf_norm(lin_comb(1.0, a.f.displacement(), -1.0, b.f.displacement()));
    return {9, "rk4 vs rattle whip agreement", gap <= 1e-4, "sup gap " + num(gap)};
}

} // namespace checks_detail

// The invariant suite behind the `check` subcommand: one line per criterion.
inline std::vector<CheckResult> run_invariant_suite(std::ostream& out) {
    using namespace checks_detail;
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<CheckResult> results;
    auto emit = [&](CheckResult r) {
        out << (r.pass ? "PASS" : "FAIL") << "  " << r.id << ". " << r.name
            << "  [" << r.detail << "]\n";
        out.flush();
        results.push_back(std::move(r));
    };

    emit(criterion_1());
    emit(criterion_2());
    WhipBundle b = whip_bundle();
    emit(criterion_3(b));
    emit(criterion_4(b));
    emit(criterion_5());
    emit(criterion_6());
    emit(criterion_7());
    emit(criterion_8());
    emit(criterion_9());

    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    emit({10, "full suite single-threaded runtime", secs < 300.0, num(secs) + " s"});
    return results;
}

} // namespace volimm
