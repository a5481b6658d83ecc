#pragma once

#include <functional>

#include <Eigen/Dense>

#include "volimm/projection.hpp"

namespace volimm {

// Dense assemblies of the matrix-free scalar operators, used as test
// oracles at small grid sizes (N <= 64).
namespace dense {

inline constexpr std::size_t kMaxDenseNodes = 64 * 64;

inline Eigen::MatrixXd assemble(const ParamGrid& grid,
                                const std::function<ScalarField(const ScalarField&)>& op) {
    const std::size_t n = grid.nodes();
    if (n > kMaxDenseNodes) throw RangeError("dense assembly capped at 64x64 nodes");
    Eigen::MatrixXd m(n, n);
    ScalarField e(grid);
    for (std::size_t j = 0; j < n; ++j) {
        e[j] = 1.0;
        ScalarField col = op(e);
        for (std::size_t i = 0; i < n; ++i) m(i, j) = col[i];
        e[j] = 0.0;
    }
    return m;
}

// Plain-symmetric positive form of a metric-selfadjoint operator A:
// B = diag(sqrt|g|) * (sign * A).
inline Eigen::MatrixXd symmetrized(const GeometryCache& c, const Eigen::MatrixXd& a, double sign) {
    Eigen::VectorXd s(a.rows());
    for (std::size_t i = 0; i < c.grid.nodes(); ++i) s(i) = c.metric.sqrt_det(i);
    Eigen::MatrixXd b = sign * s.asDiagonal() * a;
    return 0.5 * (b + b.transpose());
}

// Dense counterpart of solve_constraint_elliptic.
inline ScalarField solve_constraint(const GeometryCache& c, const ScalarField& rhs) {
    const std::size_t n = c.grid.nodes();
    Eigen::MatrixXd op = assemble(c.grid, [&](const ScalarField& u) {
        ScalarField out = laplace_beltrami(c, u);
        for (std::size_t i = 0; i < n; ++i) out[i] -= c.tr_s_norm_sq[i] * u[i];
        return out;
    });
    Eigen::MatrixXd b = symmetrized(c, op, -1.0);
    Eigen::VectorXd r(n);
    for (std::size_t i = 0; i < n; ++i) r(i) = -c.metric.sqrt_det(i) * rhs[i];

    if (c.is_minimal()) {
        // shift the constant kernel away, then re-gauge
        const double gamma = b.trace() / static_cast<double>(n);
        b += gamma * Eigen::MatrixXd::Ones(n, n) / static_cast<double>(n);
    }
    Eigen::VectorXd x = b.ldlt().solve(r);
    ScalarField p(c.grid);
    for (std::size_t i = 0; i < n; ++i) p[i] = x(i);
    if (c.is_minimal()) {
        const double vol_total = integral_vol(c, ScalarField(c.grid, 1.0));
        const double gauge = integral_vol(c, p) / vol_total;
        for (double& t : p) t -= gauge;
    }
    return p;
}

// Dense counterpart of the Psi solve inside hk_project.
inline ScalarField solve_psi(const GeometryCache& c, const ScalarField& rhs, int l) {
    if (c.is_minimal()) throw MinimalImmersionError();
    const std::size_t n = c.grid.nodes();
    Eigen::MatrixXd op = assemble(c.grid, [&](const ScalarField& u) {
        return apply_Psi(c, u, l, 1e-14).first;
    });
    Eigen::MatrixXd b = symmetrized(c, op, -1.0);
    Eigen::VectorXd r(n);
    for (std::size_t i = 0; i < n; ++i) r(i) = -c.metric.sqrt_det(i) * rhs[i];
    Eigen::VectorXd x = b.ldlt().solve(r);
    ScalarField p(c.grid);
    for (std::size_t i = 0; i < n; ++i) p[i] = x(i);
    return p;
}

// Full dense projections for cross-checking the matrix-free paths.
inline TangentField l2_project_dense(const GeometryCache& c, const TangentField& x) {
    ScalarField p = dense::solve_constraint(c, constraint_residual(c, x));
    TangentField h = x;
    axpy(-1.0, span_field(c, p), h);
    return h;
}

inline TangentField hk_project_dense(const GeometryCache& c, const TangentField& x, int l) {
    ScalarField p = dense::solve_psi(c, constraint_residual(c, x), l);
    TangentField h = x;
    auto [linv, st] = invert_L(c, span_field(c, p), l, 1e-14);
    axpy(-1.0, linv, h);
    return h;
}

} // namespace dense
} // namespace volimm
