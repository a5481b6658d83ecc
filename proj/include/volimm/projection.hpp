#pragma once

#include "volimm/sobolev.hpp"

namespace volimm {

inline constexpr double kTolProj = 1e-8;

struct ProjectionResult {
    TangentField h_mu;
    ScalarField p;
    double constraint_norm;        // ||A_f(h_mu)||_{L^2(vol g)}
    double orthogonality_defect;   // normalized G-inner product of h_mu with the removed part
    OperatorStats stats;
};

// Solve (Delta - |Tr S|^2) p = rhs. On non-minimal immersions the operator
// is strictly negative definite; on minimal ones (Tr S == 0) the kernel is
// the constants, the rhs must have zero mean against vol(g), and the
// zero-mean representative is returned.
inline std::pair<ScalarField, OperatorStats> solve_constraint_elliptic(
    const GeometryCache& c, const ScalarField& rhs, double tol = kTolProj) {

    const bool minimal = c.is_minimal();
    const double rhs_norm = norm_l2_vol(c, rhs);

    if (minimal) {
        if (rhs_norm == 0.0) return {ScalarField(c.grid), OperatorStats{}};
        const double vol_total = integral_vol(c, ScalarField(c.grid, 1.0));
        const double mean = integral_vol(c, rhs);
        // L2 norm of the constant component relative to the whole rhs
        const double mean_norm = std::abs(mean) / std::sqrt(vol_total);
        if (mean_norm > 1e-8 * rhs_norm)
            throw MinimalIncompatibleRhsError(mean / vol_total);
    }

    ScalarField p(c.grid);
    OperatorStats stats;

    const auto& b = c.tr_s_norm_sq;
    double b_min = b[0], b_max = b[0];
    for (double t : b) { b_min = std::min(b_min, t); b_max = std::max(b_max, t); }
    const bool b_const = (b_max - b_min) <= 1e-13 * std::max(b_max, 1.0);

    if (detail::metric_is_constant(c) && b_const) {
        const double b0 = b[0];
        auto mult = detail::nyquist_zeroed(c.grid, [&](double k1, double k2) {
            const double denom = -detail::metric_ksq(c, 0, k1, k2) - b0;
            return denom != 0.0 ? 1.0 / denom : 0.0;  // zero mode of the minimal branch
        });
        p = spectral::apply_multiplier(rhs, mult);
    } else {
        const detail::MeanSymbol sym(c);
        double b_mean = 0.0;
        for (double t : b) b_mean += t;
        b_mean /= b.size();
        const double floor = minimal ? sym.ksq(2.0 * std::numbers::pi / c.grid.period(0), 0.0) : 0.0;
        auto precond_mult = detail::nyquist_zeroed(c.grid, [&](double k1, double k2) {
            return 1.0 / (sym.sqrtg * std::max(sym.ksq(k1, k2) + b_mean, floor > 0 ? floor : 1e-300));
        });
        std::function<ScalarField(const ScalarField&)> apply = [&](const ScalarField& u) {
            ScalarField out = laplace_beltrami(c, u);
            for (std::size_t i = 0; i < out.size(); ++i)
                out[i] = c.metric.sqrt_det(i) * (b[i] * u[i] - out[i]);
            return out;
        };
        std::function<ScalarField(const ScalarField&)> precond = [&](const ScalarField& r) {
            return spectral::apply_multiplier(r, precond_mult);
        };
        std::function<void(ScalarField&)> deflate;
        if (minimal)
            deflate = [](ScalarField& u) {
                double m = 0.0;
                for (double t : u) m += t;
                m /= u.size();
                for (double& t : u) t -= m;
            };

        ScalarField rhs_sym(c.grid);
        for (std::size_t i = 0; i < rhs.size(); ++i)
            rhs_sym[i] = -c.metric.sqrt_det(i) * rhs[i];
        const int cap = 10 * static_cast<int>(c.grid.nodes());
        auto [x, st] = pcg<ScalarField>(rhs_sym, apply, precond, tol, cap, deflate);
        p = std::move(x);
        stats = st;
    }

    if (minimal) {
        const double vol_total = integral_vol(c, ScalarField(c.grid, 1.0));
        const double gauge = integral_vol(c, p) / vol_total;
        for (double& t : p) t -= gauge;
    }

    ScalarField check = laplace_beltrami(c, p);
    for (std::size_t i = 0; i < check.size(); ++i) check[i] -= b[i] * p[i] + rhs[i];
    stats.rel_residual = rhs_norm > 0 ? norm_l2_vol(c, check) / rhs_norm : 0.0;
    if (!stats.converged)
        throw NoConvergenceError("solve_constraint_elliptic", stats.iterations, stats.rel_residual);
    return {std::move(p), stats};
}

namespace detail {

inline ProjectionResult l2_project_impl(const GeometryCache& c, const TangentField& x,
                                        double tol, bool warn_off_constraint) {
    ScalarField rhs = constraint_residual(c, x, warn_off_constraint);
    if (c.is_minimal()) {
        // A_f(X) integrates to zero on closed M (divergence theorem); what is
        // left is discretization noise, removed so the solve stays compatible
        const double gauge = integral_vol(c, rhs) / integral_vol(c, ScalarField(c.grid, 1.0));
        for (double& t : rhs) t -= gauge;
    }
    auto [p, stats] = solve_constraint_elliptic(c, rhs, tol);
    TangentField h_mu = x;
    axpy(-1.0, span_field(c, p), h_mu);

    const double cnorm = norm_l2_vol(c, constraint_residual(c, h_mu));
    TangentField removed = lin_comb(1.0, x, -1.0, h_mu);
    const double xx = inner_l2_vol(c, x, x);
    const double ortho = std::abs(inner_l2_vol(c, h_mu, removed)) / (xx + 1e-300);
    return {std::move(h_mu), std::move(p), cnorm, ortho, stats};
}

} // namespace detail

// L^2(vol g)-orthogonal projection onto the volume-preserving tangent space:
// P(X) = X - Tf.grad p - p TrS with (Delta - |TrS|^2) p = A_f(X).
inline ProjectionResult l2_project(const GeometryCache& c, const TangentField& x,
                                   double tol = kTolProj) {
    return detail::l2_project_impl(c, x, tol, false);
}

// The three-term decomposition h = h_mu + Tf.grad p + p TrS at a point of
// the constraint manifold (rho == 1 expected; reassembly is exact by
// construction). Minimal immersions reproduce the Helmholtz-Hodge split.
inline ProjectionResult decompose(const GeometryCache& c, const TangentField& h,
                                  double tol = kTolProj) {
    return detail::l2_project_impl(c, h, tol, true);
}

// Solve Psi(p) = rhs by CG on the negated (positive definite) operator.
// Only defined on non-minimal immersions, where ker Psi = 0.
inline std::pair<ScalarField, OperatorStats> solve_psi(const GeometryCache& c,
                                                       const ScalarField& rhs, int l,
                                                       double tol = kTolProj) {
    validate_order(l);
    if (c.is_minimal()) throw MinimalImmersionError();
    const double inner_tol = std::max(1e-14, 1e-3 * tol);

    double b_mean = 0.0;
    for (double t : c.tr_s_norm_sq) b_mean += t;
    b_mean /= c.tr_s_norm_sq.size();
    const detail::MeanSymbol sym(c);
    auto precond_mult = detail::nyquist_zeroed(c.grid, [&, l](double k1, double k2) {
        const double q = sym.ksq(k1, k2);
        return 1.0 / (sym.sqrtg * (q / std::pow(1.0 + q, l) + b_mean));
    });

    std::function<ScalarField(const ScalarField&)> apply = [&, l](const ScalarField& u) {
        auto [psi, st] = apply_Psi(c, u, l, inner_tol);
        for (std::size_t i = 0; i < psi.size(); ++i) psi[i] *= -c.metric.sqrt_det(i);
        return psi;
    };
    std::function<ScalarField(const ScalarField&)> precond = [&](const ScalarField& r) {
        return spectral::apply_multiplier(r, precond_mult);
    };

    ScalarField rhs_sym(c.grid);
    for (std::size_t i = 0; i < rhs.size(); ++i)
        rhs_sym[i] = -c.metric.sqrt_det(i) * rhs[i];
    const int cap = 10 * static_cast<int>(c.grid.nodes());
    auto [p, stats] = pcg<ScalarField>(rhs_sym, apply, precond, tol, cap);
    if (!stats.converged)
        throw NoConvergenceError("solve_psi", stats.iterations, stats.rel_residual);
    return {std::move(p), stats};
}

// G^l-orthogonal projection (l >= 1, non-minimal immersions):
// P(X) = X - L^{-1}(Tf.grad p + p TrS) with Psi(p) = A_f(X).
inline ProjectionResult hk_project(const GeometryCache& c, const TangentField& x, int l,
                                   double tol = kTolProj) {
    if (l < 1) throw RangeError("hk_project needs l >= 1; use l2_project for l = 0");
    ScalarField rhs = constraint_residual(c, x);
    auto [p, stats] = solve_psi(c, rhs, l, tol);
    const double inner_tol = std::max(1e-14, 1e-3 * tol);

    TangentField h_mu = x;
    auto [linv, li_stats] = invert_L(c, span_field(c, p), l, inner_tol);
    axpy(-1.0, linv, h_mu);

    const double cnorm = norm_l2_vol(c, constraint_residual(c, h_mu));
    TangentField removed = lin_comb(1.0, x, -1.0, h_mu);
    const double gxx = inner_product_Gl(c, x, x, l);
    const double ortho = std::abs(inner_product_Gl(c, h_mu, removed, l)) / (gxx + 1e-300);
    return {std::move(h_mu), std::move(p), cnorm, ortho, stats};
}

} // namespace volimm
