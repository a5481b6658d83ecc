#pragma once

#include <functional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "volimm/field.hpp"

namespace volimm {

struct OperatorStats {
    int iterations = 0;
    double rel_residual = 0.0;
    double condition_estimate = 1.0;  // Lanczos estimate from the CG coefficients
    bool converged = true;
};

namespace detail {

inline double lanczos_condition(const std::vector<double>& alphas,
                                const std::vector<double>& betas) {
    const int m = static_cast<int>(alphas.size());
    if (m == 0) return 1.0;
    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(m, m);
    for (int j = 0; j < m; ++j) {
        T(j, j) = 1.0 / alphas[j] + (j > 0 ? betas[j - 1] / alphas[j - 1] : 0.0);
        if (j + 1 < m) {
            const double off = std::sqrt(std::max(betas[j], 0.0)) / alphas[j];
            T(j, j + 1) = off;
            T(j + 1, j) = off;
        }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T, Eigen::EigenvaluesOnly);
    const double lo = es.eigenvalues().minCoeff();
    const double hi = es.eigenvalues().maxCoeff();
    return lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
}

} // namespace detail

// Preconditioned conjugate gradients in the plain grid inner product.
// `apply` must be symmetric positive (semi)definite in that inner product;
// metric-weighted operators are symmetrized by the caller (fold sqrt|g|
// into operator and right-hand side). `deflate`, when given, projects out
// a known kernel (applied to the rhs and to every preconditioned residual).
template <typename Field>
std::pair<Field, OperatorStats> pcg(
    const Field& rhs,
    const std::function<Field(const Field&)>& apply,
    const std::function<Field(const Field&)>& precond,
    double tol, int max_iter,
    const std::function<void(Field&)>& deflate = {}) {

    Field b = rhs;
    if (deflate) deflate(b);
    const double bnorm = std::sqrt(dot_plain(b, b));

    Field x = b;
    scale(x, 0.0);
    OperatorStats stats;
    if (bnorm == 0.0) return {std::move(x), stats};

    Field r = b;
    Field z = precond ? precond(r) : r;
    if (deflate) deflate(z);
    Field p = z;
    double rz = dot_plain(r, z);

    std::vector<double> alphas, betas;
    for (int it = 0; it < max_iter; ++it) {
        Field ap = apply(p);
        const double pap = dot_plain(p, ap);
        if (!(pap > 0.0)) {  // lost positive-definiteness (roundoff); stop here
            stats.converged = false;
            break;
        }
        const double alpha = rz / pap;
        alphas.push_back(alpha);
        axpy(alpha, p, x);
        axpy(-alpha, ap, r);
        stats.iterations = it + 1;
        const double rnorm = std::sqrt(dot_plain(r, r));
        stats.rel_residual = rnorm / bnorm;
        if (stats.rel_residual <= tol) break;
        if (it + 1 == max_iter) {
            stats.converged = false;
            break;
        }
        z = precond ? precond(r) : r;
        if (deflate) deflate(z);
        const double rz_new = dot_plain(r, z);
        const double beta = rz_new / rz;
        betas.push_back(beta);
        rz = rz_new;
        Field pnew = z;
        axpy(beta, p, pnew);
        p = std::move(pnew);
    }
    stats.condition_estimate = detail::lanczos_condition(alphas, betas);
    return {std::move(x), stats};
}

// Right-preconditioned BiCGSTAB for nonsymmetric operators (the exact
// constraint Jacobians of the time steppers are slightly nonsymmetric at
// the band edge, where frozen-coefficient CG iterations go unstable).
template <typename Field>
std::pair<Field, OperatorStats> bicgstab(
    const Field& rhs,
    const std::function<Field(const Field&)>& apply,
    const std::function<Field(const Field&)>& precond,
    double tol, int max_iter) {

    const double bnorm = std::sqrt(dot_plain(rhs, rhs));
    Field x = rhs;
    scale(x, 0.0);
    OperatorStats stats;
    if (bnorm == 0.0) return {std::move(x), stats};

    Field r = rhs;
    Field r_hat = r;
    Field p = r;
    scale(p, 0.0);
    Field v = p;
    double rho_old = 1.0, alpha = 1.0, omega = 1.0;

    for (int it = 0; it < max_iter; ++it) {
        const double rho = dot_plain(r_hat, r);
        if (std::abs(rho) < 1e-300) { stats.converged = false; break; }
        if (it > 0) {
            const double beta = (rho / rho_old) * (alpha / omega);
            Field pn = r;
            axpy(-omega, v, p);
            axpy(beta, p, pn);
            p = std::move(pn);
        } else {
            p = r;
        }
        Field p_hat = precond ? precond(p) : p;
        v = apply(p_hat);
        const double rv = dot_plain(r_hat, v);
        if (std::abs(rv) < 1e-300) { stats.converged = false; break; }
        alpha = rho / rv;
        Field s = r;
        axpy(-alpha, v, s);
        stats.iterations = it + 1;
        if (std::sqrt(dot_plain(s, s)) <= tol * bnorm) {
            axpy(alpha, p_hat, x);
            stats.rel_residual = std::sqrt(dot_plain(s, s)) / bnorm;
            return {std::move(x), stats};
        }
        Field s_hat = precond ? precond(s) : s;
        Field t = apply(s_hat);
        const double tt = dot_plain(t, t);
        if (tt < 1e-300) { stats.converged = false; break; }
        omega = dot_plain(t, s) / tt;
        axpy(alpha, p_hat, x);
        axpy(omega, s_hat, x);
        r = s;
        axpy(-omega, t, r);
        stats.rel_residual = std::sqrt(dot_plain(r, r)) / bnorm;
        if (stats.rel_residual <= tol) return {std::move(x), stats};
        if (std::abs(omega) < 1e-300) { stats.converged = false; break; }
        rho_old = rho;
    }
    stats.converged = stats.rel_residual <= tol;
    return {std::move(x), stats};
}

} // namespace volimm
